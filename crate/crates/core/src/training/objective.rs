//! Smooth surrogate objectives and their analytic gradients.
//!
//! Parameters are packed as `[w0, w1, .., wd]`. With `l(z) = log(1 + e^{-z})`
//! and `r_F = sqrt(C_F)`:
//!
//! * static: `mean l(y s) + l2 |w|^2`
//! * manipulation-proof: `mean l(y (s + 2 r_A)) + l2 |w|^2`
//! * constructive adaptation:
//!   `mean [ l(y (s + 2 r_M)) + lambda l(s + 2 r_I) ] + eta P(w) + l2 |w|^2`
//!
//! where `s = w^T x` and `P` is the mean directional penalty
//! `sum_k max(r_k (Delta(x) - x)_k, 0)` over the unconstrained best response.

use serde::{Deserialize, Serialize};

use crate::best_response::MAX_GAIN;
use crate::cost_model::{cov_times_weights, effective_variance, CostModel, Family, FeatureTaxonomy};
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::linear::LinearModel;
use crate::par::{self, Exec};

/// Below this `C_F` the gradient of `sqrt(C_F)` is taken as zero.
pub const SQRT_FLOOR: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub loss: f64,
    pub gradient: Vec<f64>,
}

/// Logistic loss `log(1 + e^{-z})`.
pub fn logistic_loss(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// `d/dz log(1 + e^{-z}) = -1 / (1 + e^z)`.
fn logistic_loss_deriv(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + z.exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveKind {
    Static,
    ManipulationProof,
    ConstructiveAdaptation { lambda: f64, eta: f64 },
    /// The mean directional penalty on its own (no loss, no regularizer).
    DirectionPenalty,
}

/// A training objective bound to data and a cost model.
pub struct Objective<'a> {
    pub kind: ObjectiveKind,
    pub data: &'a Dataset,
    pub model: &'a CostModel,
    pub l2_reg: f64,
    pub exec: Exec,
}

/// Quantities that depend on `w` but not on the sample.
struct Geometry {
    w: LinearModel,
    c_i: f64,
    c_m: f64,
    c_a: f64,
    /// `S_A w_A` scattered to feature positions.
    u_a: Vec<f64>,
    /// Full `d x d` actionable covariance (zeros across blocks and on
    /// immutable features), row-major.
    cov_a: Vec<f64>,
    actionable: Vec<usize>,
    directions: Vec<i8>,
}

impl Geometry {
    fn new(w: LinearModel, model: &CostModel, tax: &FeatureTaxonomy, need_penalty: bool) -> Self {
        let d = tax.dim();
        let c_i = effective_variance(&w, model, tax, Family::I);
        let c_m = effective_variance(&w, model, tax, Family::M);
        let u_a = cov_times_weights(&w.weights, model, tax, Family::A);
        let mut cov_a = Vec::new();
        if need_penalty {
            cov_a = vec![0.0; d * d];
            for (idx, kind) in [
                (tax.improvable(), crate::cost_model::FeatureKind::Improvable),
                (tax.manipulable(), crate::cost_model::FeatureKind::Manipulable),
            ] {
                let cov = model.cov(kind);
                for (a, &ka) in idx.iter().enumerate() {
                    for (b, &kb) in idx.iter().enumerate() {
                        cov_a[ka * d + kb] = cov[(a, b)];
                    }
                }
            }
        }
        Self {
            w,
            c_i,
            c_m,
            c_a: c_i + c_m,
            u_a,
            cov_a,
            actionable: tax.family_indices(Family::A),
            directions: tax.directions(),
        }
    }
}

fn sqrt_and_grad(c: f64, u: &[f64], idx: &[usize], d: usize) -> (f64, Vec<f64>) {
    let r = c.sqrt();
    let mut g = vec![0.0; d + 1];
    if c >= SQRT_FLOOR {
        for &k in idx {
            g[k + 1] = u[k] / r;
        }
    }
    (r, g)
}

#[derive(Clone)]
struct Acc {
    loss: f64,
    penalty: f64,
    /// Coefficients multiplying the gradients of `r_M`, `r_I`, `r_A`.
    coef_m: f64,
    coef_i: f64,
    coef_a: f64,
    grad: Vec<f64>,
    penalty_grad: Vec<f64>,
}

impl Acc {
    fn zero(p: usize) -> Self {
        Self {
            loss: 0.0,
            penalty: 0.0,
            coef_m: 0.0,
            coef_i: 0.0,
            coef_a: 0.0,
            grad: vec![0.0; p],
            penalty_grad: vec![0.0; p],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.loss += other.loss;
        self.penalty += other.penalty;
        self.coef_m += other.coef_m;
        self.coef_i += other.coef_i;
        self.coef_a += other.coef_a;
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += b;
        }
        for (a, b) in self.penalty_grad.iter_mut().zip(&other.penalty_grad) {
            *a += b;
        }
        self
    }
}

fn axpy_augmented(out: &mut [f64], coef: f64, x: &[f64]) {
    out[0] += coef;
    for (o, v) in out[1..].iter_mut().zip(x) {
        *o += coef * v;
    }
}

/// Adds one subject's directional penalty and its subgradient.
///
/// The move/no-move switch of the best response is held fixed.
fn penalty_sample(geo: &Geometry, x: &[f64], s: f64, acc: &mut Acc) {
    let c = geo.c_a;
    if c < SQRT_FLOOR || geo.w.predict(x) == 1 || s.abs() / c.sqrt() > MAX_GAIN {
        return;
    }
    let d = x.len();
    for &k in &geo.actionable {
        let r = f64::from(geo.directions[k]);
        if r == 0.0 {
            continue;
        }
        let delta_k = -(s / c) * geo.u_a[k];
        let v = r * delta_k;
        if v <= 0.0 {
            continue;
        }
        acc.penalty += v;
        let pg = &mut acc.penalty_grad;
        // through s
        axpy_augmented(pg, -r * geo.u_a[k] / c, x);
        // through u_k = (S_A w)_k and C_A = w_A^T S_A w_A
        let row = &geo.cov_a[k * d..(k + 1) * d];
        let through_c = 2.0 * r * s * geo.u_a[k] / (c * c);
        for &j in &geo.actionable {
            pg[j + 1] += -r * (s / c) * row[j] + through_c * geo.u_a[j];
        }
    }
}

impl Objective<'_> {
    pub fn new<'a>(kind: ObjectiveKind, data: &'a Dataset, model: &'a CostModel, l2_reg: f64) -> Objective<'a> {
        Objective {
            kind,
            data,
            model,
            l2_reg,
            exec: Exec::default(),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn dim(&self) -> usize {
        self.data.d() + 1
    }

    pub fn evaluate(&self, params: &[f64]) -> Result<ObjectiveValue> {
        let data = self.data;
        let tax = data.taxonomy();
        let d = data.d();
        if params.len() != d + 1 {
            return Err(Error::dim("parameter vector", d + 1, params.len()));
        }
        let n = data.n();
        let w = LinearModel::from_params(params);
        let (lambda, eta) = match self.kind {
            ObjectiveKind::ConstructiveAdaptation { lambda, eta } => (lambda, eta),
            _ => (0.0, 0.0),
        };
        let penalty_active = match self.kind {
            ObjectiveKind::DirectionPenalty => tax.has_directions(),
            ObjectiveKind::ConstructiveAdaptation { .. } => eta > 0.0 && tax.has_directions(),
            _ => false,
        };
        let geo = Geometry::new(w, self.model, tax, penalty_active);
        let r_m = geo.c_m.sqrt();
        let r_i = geo.c_i.sqrt();
        let r_a = geo.c_a.sqrt();
        let kind = self.kind;

        let chunk = |range: std::ops::Range<usize>| {
            let mut acc = Acc::zero(d + 1);
            for i in range {
                let x = data.row(i);
                let y = f64::from(data.label(i));
                let s = geo.w.score(x);
                match kind {
                    ObjectiveKind::Static => {
                        let m = y * s;
                        acc.loss += logistic_loss(m);
                        axpy_augmented(&mut acc.grad, logistic_loss_deriv(m) * y, x);
                    }
                    ObjectiveKind::ManipulationProof => {
                        let m = y * (s + 2.0 * r_a);
                        let dl = logistic_loss_deriv(m) * y;
                        acc.loss += logistic_loss(m);
                        acc.coef_a += dl;
                        axpy_augmented(&mut acc.grad, dl, x);
                    }
                    ObjectiveKind::ConstructiveAdaptation { .. } => {
                        let m1 = y * (s + 2.0 * r_m);
                        let dl1 = logistic_loss_deriv(m1) * y;
                        let m2 = s + 2.0 * r_i;
                        let dl2 = lambda * logistic_loss_deriv(m2);
                        acc.loss += logistic_loss(m1) + lambda * logistic_loss(m2);
                        acc.coef_m += dl1;
                        acc.coef_i += dl2;
                        axpy_augmented(&mut acc.grad, dl1 + dl2, x);
                        if penalty_active {
                            penalty_sample(&geo, x, s, &mut acc);
                        }
                    }
                    ObjectiveKind::DirectionPenalty => {
                        if penalty_active {
                            penalty_sample(&geo, x, s, &mut acc);
                        }
                    }
                }
            }
            acc
        };
        let acc = par::chunked_reduce(self.exec, n, chunk, Acc::merge).unwrap_or_else(|| Acc::zero(d + 1));

        let inv_n = if n > 0 { 1.0 / n as f64 } else { 0.0 };
        let penalty_weight = match self.kind {
            ObjectiveKind::DirectionPenalty => 1.0,
            _ => eta,
        };
        let mut loss = acc.loss * inv_n;
        let mut gradient: Vec<f64> = acc.grad.iter().map(|g| g * inv_n).collect();

        for (coef, c, idx) in [
            (acc.coef_m, geo.c_m, tax.manipulable().to_vec()),
            (acc.coef_i, geo.c_i, tax.improvable().to_vec()),
            (acc.coef_a, geo.c_a, geo.actionable.clone()),
        ] {
            if coef != 0.0 {
                let (_, dr) = sqrt_and_grad(c, &geo.u_a, &idx, d);
                for (g, v) in gradient.iter_mut().zip(&dr) {
                    *g += 2.0 * coef * inv_n * v;
                }
            }
        }
        if penalty_active {
            loss += penalty_weight * acc.penalty * inv_n;
            for (g, v) in gradient.iter_mut().zip(&acc.penalty_grad) {
                *g += penalty_weight * inv_n * v;
            }
        }
        if self.kind != ObjectiveKind::DirectionPenalty && self.l2_reg > 0.0 {
            for k in 0..d {
                let wk = params[k + 1];
                loss += self.l2_reg * wk * wk;
                gradient[k + 1] += 2.0 * self.l2_reg * wk;
            }
        }
        if !loss.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss);
        }
        Ok(ObjectiveValue { loss, gradient })
    }
}

/// Constructive-adaptation objective at `w`.
pub fn ca_objective(
    w: &LinearModel,
    data: &Dataset,
    model: &CostModel,
    lambda: f64,
    eta: f64,
    l2_reg: f64,
) -> Result<ObjectiveValue> {
    w.check_dim(data.d())?;
    model.check_taxonomy(data.taxonomy())?;
    Objective::new(ObjectiveKind::ConstructiveAdaptation { lambda, eta }, data, model, l2_reg).evaluate(&w.to_params())
}

/// Mean directional penalty and its subgradient with respect to
/// `[w0, w1, .., wd]`.
///
/// `tax` overrides the dataset's taxonomy (it must have the same dimension).
pub fn direction_penalty(
    w: &LinearModel,
    data: &Dataset,
    model: &CostModel,
    tax: &FeatureTaxonomy,
) -> Result<ObjectiveValue> {
    w.check_dim(tax.dim())?;
    model.check_taxonomy(tax)?;
    let rebound;
    let data = if data.taxonomy() == tax {
        data
    } else {
        rebound = data.with_taxonomy(tax.clone())?;
        &rebound
    };
    Objective::new(ObjectiveKind::DirectionPenalty, data, model, 0.0).evaluate(&w.to_params())
}
