//! Structural analyses of best-response costs: dominance of the
//! unconstrained response over the improving one, cost-reducing correlation
//! perturbations, and cost gaps between subgroups.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::MAX_GAIN;
use crate::cost_model::{effective_variance, CostModel, Family, FeatureKind, FeatureTaxonomy};
use crate::error::{Error, Result};
use crate::linear::LinearModel;

fn formula_cost(score: f64, c: f64) -> f64 {
    if c > 0.0 {
        score.abs() / c.sqrt()
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub improving_feasible: bool,
    pub unconstrained_feasible: bool,
    /// `+inf` when the classifier puts no weight on improvable features.
    pub cost_i: f64,
    pub cost_a: f64,
}

/// Compares the improving and unconstrained response costs for one subject.
pub fn check_dominance(x: &[f64], w: &LinearModel, model: &CostModel, tax: &FeatureTaxonomy) -> Result<Dominance> {
    super::check_inputs(x, w, model, tax)?;
    let s = w.score(x);
    let cost_i = formula_cost(s, effective_variance(w, model, tax, Family::I));
    let cost_a = formula_cost(s, effective_variance(w, model, tax, Family::A));
    Ok(Dominance {
        improving_feasible: cost_i <= MAX_GAIN,
        unconstrained_feasible: cost_a <= MAX_GAIN,
        cost_i,
        cost_a,
    })
}

/// A symmetric off-diagonal perturbation `S^{-1} + tau (e_i e_j^T + e_j e_i^T)`
/// inside one cost block that lowers every sampled subject's cost.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub block: FeatureKind,
    /// Feature (column) indices in the taxonomy.
    pub i: usize,
    pub j: usize,
    pub tau: f64,
    pub new_model: CostModel,
    pub costs_before: Vec<f64>,
    pub costs_after: Vec<f64>,
}

/// Searches for a cost-reducing correlation between two features of the same
/// block.
///
/// Pairs are scanned with `|w_i|` descending. For each pair the sign rules on
/// `det(T)` and `tau` select candidate perturbations at `|tau| = tau_max / 2`
/// (where `det(T) > 0`) and `|tau| = 2 tau_min` (where `det(T) < 0`); the
/// first candidate that keeps the block positive definite and strictly lowers
/// the unconstrained cost of every rejected sample is returned.
pub fn find_cost_reducing_perturbation(
    model: &CostModel,
    w: &LinearModel,
    tax: &FeatureTaxonomy,
    sample: &[Vec<f64>],
) -> Result<Perturbation> {
    w.check_dim(tax.dim())?;
    model.check_taxonomy(tax)?;
    for x in sample {
        tax.check_vector(x, "sample row")?;
    }
    let scores: Vec<f64> = sample
        .iter()
        .filter(|x| w.predict(x) == -1)
        .map(|x| w.score(x))
        .collect();
    if scores.is_empty() {
        return Err(Error::NoValidPerturbation("sample has no rejected subjects".into()));
    }

    let mut order: Vec<usize> = tax
        .family_indices(Family::A)
        .into_iter()
        .filter(|&k| w.weights[k] != 0.0)
        .collect();
    if order.is_empty() {
        return Err(Error::NoValidPerturbation("classifier has no actionable weight".into()));
    }
    order.sort_by(|&a, &b| w.weights[b].abs().total_cmp(&w.weights[a].abs()));

    let c_before = effective_variance(w, model, tax, Family::A);
    let costs_before: Vec<f64> = scores.iter().map(|&s| formula_cost(s, c_before)).collect();

    for &i in &order {
        let kind = tax.feature(i).kind;
        let block: &[usize] = match kind {
            FeatureKind::Improvable => tax.improvable(),
            _ => tax.manipulable(),
        };
        let a = block.iter().position(|&k| k == i).expect("index in its own block");
        let cov = model.cov(kind);
        let wf: Vec<f64> = block.iter().map(|&k| w.weights[k]).collect();
        let p: Vec<f64> = (0..block.len())
            .map(|r| (0..block.len()).map(|c| cov[(r, c)] * wf[c]).sum())
            .collect();

        for (b, &j) in block.iter().enumerate() {
            if b == a {
                continue;
            }
            let (sii, sjj, sij) = (cov[(a, a)], cov[(b, b)], cov[(a, b)]);
            // w^T E w = (E' + E''/tau) / det(T), with E = S - S~
            let e1 = -sjj * p[a] * p[a] - sii * p[b] * p[b] + 2.0 * sij * p[a] * p[b];
            let e2 = 2.0 * p[a] * p[b];
            let geo = (sii * sjj).sqrt();
            let tau_max = 1.0 / (geo + sij.abs());
            let tau_min = 1.0 / (geo - sij.abs());

            for (magnitude, det_sign) in [(tau_max / 2.0, 1.0), (2.0 * tau_min, -1.0)] {
                if e1 != 0.0 && det_sign != -e1.signum() {
                    continue;
                }
                let signs: &[f64] = if e2 != 0.0 { &[-det_sign * e2.signum()] } else { &[-1.0, 1.0] };
                for &sign in signs {
                    let tau = sign * magnitude;
                    let det = (1.0 / tau + sij).powi(2) - sii * sjj;
                    if det.signum() != det_sign {
                        continue;
                    }
                    if let Some(found) =
                        try_candidate(model, w, tax, kind, (a, b), (i, j), tau, &scores, c_before, &costs_before)
                    {
                        return Ok(found);
                    }
                }
            }
        }
    }
    Err(Error::NoValidPerturbation(
        "no same-block feature pair admits a cost-reducing perturbation".into(),
    ))
}

#[allow(clippy::too_many_arguments)]
fn try_candidate(
    model: &CostModel,
    w: &LinearModel,
    tax: &FeatureTaxonomy,
    kind: FeatureKind,
    (a, b): (usize, usize),
    (i, j): (usize, usize),
    tau: f64,
    scores: &[f64],
    c_before: f64,
    costs_before: &[f64],
) -> Option<Perturbation> {
    let mut inv = model.inv_cov(kind).clone();
    inv[(a, b)] += tau;
    inv[(b, a)] += tau;
    let new_model = match kind {
        FeatureKind::Improvable => CostModel::new(inv, model.inv_cov(FeatureKind::Manipulable).clone()),
        _ => CostModel::new(model.inv_cov(FeatureKind::Improvable).clone(), inv),
    }
    .ok()?;
    let c_after = effective_variance(w, &new_model, tax, Family::A);
    if c_after <= c_before {
        return None;
    }
    let costs_after: Vec<f64> = scores.iter().map(|&s| formula_cost(s, c_after)).collect();
    if costs_after.iter().zip(costs_before).any(|(after, before)| after >= before) {
        return None;
    }
    Some(Perturbation {
        block: kind,
        i,
        j,
        tau,
        new_model,
        costs_before: costs_before.to_vec(),
        costs_after,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostGap {
    pub cost_phi: f64,
    pub cost_psi: f64,
}

/// Unconstrained best-response cost of one profile under two subgroup cost
/// models that share the improvable block, with `phi`'s manipulable block
/// dominating `psi`'s in the Loewner order.
pub fn subgroup_cost_gap(
    x: &[f64],
    w: &LinearModel,
    model_phi: &CostModel,
    model_psi: &CostModel,
    tax: &FeatureTaxonomy,
) -> Result<CostGap> {
    super::check_inputs(x, w, model_phi, tax)?;
    model_psi.check_taxonomy(tax)?;
    let shared = model_phi.inv_cov(FeatureKind::Improvable) - model_psi.inv_cov(FeatureKind::Improvable);
    let scale = model_phi.inv_cov(FeatureKind::Improvable).amax().max(1.0);
    if shared.amax() > 1e-12 * scale {
        return Err(Error::OrderingViolation("improvable cost blocks differ".into()));
    }
    let diff: DMatrix<f64> =
        model_phi.inv_cov(FeatureKind::Manipulable) - model_psi.inv_cov(FeatureKind::Manipulable);
    if diff.nrows() > 0 {
        let scale = model_phi.inv_cov(FeatureKind::Manipulable).amax().max(1.0);
        let min_eig = SymmetricEigen::new(diff).eigenvalues.min();
        if min_eig < -1e-12 * scale {
            return Err(Error::OrderingViolation(format!(
                "manipulable block difference has eigenvalue {min_eig:e} < 0"
            )));
        }
    }
    let s = w.score(x);
    Ok(CostGap {
        cost_phi: formula_cost(s, effective_variance(w, model_phi, tax, Family::A)),
        cost_psi: formula_cost(s, effective_variance(w, model_psi, tax, Family::A)),
    })
}
