#![allow(dead_code)]

use cadapt_core::training::ObjectiveKind;
use cadapt_core::{best_response, effective_variance, CostModel, Dataset, Family, Feature, FeatureKind, FeatureTaxonomy, LinearModel};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `A A^T + shift I` with Gaussian `A`: dense and well conditioned.
pub fn random_spd(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| normal(rng));
    &a * a.transpose() + DMatrix::identity(n, n) * (0.5 + n as f64 * 0.25)
}

/// Taxonomy with `d_i` improvable, `d_m` manipulable and `d_u` immutable
/// features, kinds interleaved so block indices are not contiguous.
pub fn taxonomy(d_i: usize, d_m: usize, d_u: usize) -> FeatureTaxonomy {
    let mut kinds = Vec::new();
    let (mut i, mut m, mut u) = (0, 0, 0);
    while i < d_i || m < d_m || u < d_u {
        if m < d_m {
            kinds.push(FeatureKind::Manipulable);
            m += 1;
        }
        if i < d_i {
            kinds.push(FeatureKind::Improvable);
            i += 1;
        }
        if u < d_u {
            kinds.push(FeatureKind::Immutable);
            u += 1;
        }
    }
    FeatureTaxonomy::new(
        kinds
            .into_iter()
            .enumerate()
            .map(|(k, kind)| Feature::new(format!("f{k}"), kind, 0))
            .collect(),
    )
    .unwrap()
}

pub struct Instance {
    pub tax: FeatureTaxonomy,
    pub model: CostModel,
    pub w: LinearModel,
    pub x: Vec<f64>,
}

pub fn random_model(rng: &mut impl Rng, d_i: usize, d_m: usize) -> CostModel {
    CostModel::new(random_spd(rng, d_i), random_spd(rng, d_m)).unwrap()
}

pub fn random_vec(rng: &mut impl Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * normal(rng)).collect()
}

/// Random instance with `1 <= d_i, d_m <= max_block` and up to two immutable
/// features. The score is drawn so the subject is often within reach.
pub fn random_instance(rng: &mut impl Rng, max_block: usize) -> Instance {
    let d_i = rng.random_range(1..=max_block);
    let d_m = rng.random_range(1..=max_block);
    let d_u = rng.random_range(0..=2);
    let tax = taxonomy(d_i, d_m, d_u);
    let model = random_model(rng, d_i, d_m);
    let w = LinearModel::new(normal(rng), random_vec(rng, tax.dim(), 1.0));
    let x = random_vec(rng, tax.dim(), 0.5);
    Instance { tax, model, w, x }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `|a - b| / max(1, |a|, |b|)`, maximised over components.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Independent loss oracle: plain loops, no shared helpers beyond the cost
/// model accessors.
pub fn naive_loss(kind: ObjectiveKind, data: &Dataset, model: &CostModel, l2: f64, p: &[f64]) -> f64 {
    let w = LinearModel::from_params(p);
    let tax = data.taxonomy();
    let quad = |idx: &[usize], cov: &DMatrix<f64>| {
        let mut c = 0.0;
        for (a, &ka) in idx.iter().enumerate() {
            for (b, &kb) in idx.iter().enumerate() {
                c += w.weights[ka] * cov[(a, b)] * w.weights[kb];
            }
        }
        c
    };
    let c_i = quad(tax.improvable(), model.cov(FeatureKind::Improvable));
    let c_m = quad(tax.manipulable(), model.cov(FeatureKind::Manipulable));
    let ell = |z: f64| (1.0 + (-z).exp()).ln();
    let mut total = 0.0;
    for i in 0..data.n() {
        let x = data.row(i);
        let y = f64::from(data.label(i));
        let s = w.intercept + x.iter().zip(&w.weights).map(|(a, b)| a * b).sum::<f64>();
        total += match kind {
            ObjectiveKind::Static => ell(y * s),
            ObjectiveKind::ManipulationProof => ell(y * (s + 2.0 * (c_i + c_m).sqrt())),
            ObjectiveKind::ConstructiveAdaptation { lambda, eta } => {
                let mut v = ell(y * (s + 2.0 * c_m.sqrt())) + lambda * ell(s + 2.0 * c_i.sqrt());
                if eta > 0.0 {
                    let br = best_response(x, &w, model, tax, Family::A).unwrap();
                    for (k, r) in tax.directions().iter().enumerate() {
                        v += eta * (f64::from(*r) * (br.adapted[k] - x[k])).max(0.0);
                    }
                }
                v
            }
            ObjectiveKind::DirectionPenalty => unreachable!(),
        };
    }
    total / data.n() as f64 + l2 * w.weights.iter().map(|v| v * v).sum::<f64>()
}

pub fn gradient_dataset(rng: &mut impl Rng) -> (Dataset, CostModel) {
    let base = taxonomy(2, 2, 1);
    let dirs: Vec<(String, i8)> = vec![("f0".into(), 1), ("f1".into(), -1), ("f3".into(), -1)];
    let tax = base.with_directions(&dirs).unwrap();
    let n = 40;
    let x = random_vec(rng, n * tax.dim(), 1.0);
    let y: Vec<i8> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    let model = random_model(rng, 2, 2);
    (Dataset::new("grad", x, y, tax).unwrap(), model)
}

/// Whether `p` is within reach of a penalty kink: the accept switch at
/// `s = 0`, the move switch at cost 2, or a directional change near zero.
pub fn near_kink(data: &Dataset, model: &CostModel, p: &[f64]) -> bool {
    let w = LinearModel::from_params(p);
    let tax = data.taxonomy();
    let c_a = effective_variance(&w, model, tax, Family::A);
    let dirs = tax.directions();
    data.rows().any(|x| {
        let s = w.score(x);
        if s.abs() < 1e-4 || (s.abs() / c_a.sqrt() - 2.0).abs() < 1e-4 {
            return true;
        }
        let br = best_response(x, &w, model, tax, Family::A).unwrap();
        br.moved && dirs.iter().enumerate().any(|(k, &r)| r != 0 && (br.adapted[k] - x[k]).abs() < 1e-6)
    })
}
