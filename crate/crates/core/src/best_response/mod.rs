//! Decision-subject best responses to a published linear classifier.
//!
//! A subject rejected by `h(x) = sign(w^T x)` may move the features of one
//! family `F` to reach the decision boundary. The cheapest such move under
//! the Mahalanobis cost is
//!
//! ```text
//! x_F' = x_F - (w^T x / C_F) S_F w_F,   C_F = w_F^T S_F w_F,
//! ```
//!
//! costing `|w^T x| / sqrt(C_F)`. The subject only moves when that cost is at
//! most 2, the utility gained by flipping the decision from -1 to +1.

mod analysis;
mod flipset;
mod oracle;

pub use analysis::{
    check_dominance, find_cost_reducing_perturbation, subgroup_cost_gap, CostGap, Dominance, Perturbation,
};
pub use flipset::{flipset, Flipset, FlipsetRow, Movement};
pub use oracle::oracle_best_response;

use serde::{Deserialize, Serialize};

use crate::cost_model::{cov_times_weights, effective_variance, CostModel, Family, FeatureTaxonomy};
use crate::error::Result;
use crate::linear::LinearModel;

/// Largest cost a subject will pay to flip a rejection.
pub const MAX_GAIN: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponseResult {
    pub adapted: Vec<f64>,
    pub cost_incurred: f64,
    pub moved: bool,
    pub family: Family,
    pub original_score: f64,
    pub adapted_score: f64,
    pub predicted_before: i8,
}

impl BestResponseResult {
    pub(crate) fn unmoved(x: &[f64], w: &LinearModel, family: Family) -> Self {
        let score = w.score(x);
        Self {
            adapted: x.to_vec(),
            cost_incurred: 0.0,
            moved: false,
            family,
            original_score: score,
            adapted_score: score,
            predicted_before: w.predict(x),
        }
    }

    /// Prediction after adapting; a moved subject sits on the boundary and is
    /// accepted.
    pub fn predicted_after(&self) -> i8 {
        if self.moved {
            1
        } else {
            self.predicted_before
        }
    }
}

pub(crate) fn check_inputs(x: &[f64], w: &LinearModel, model: &CostModel, tax: &FeatureTaxonomy) -> Result<()> {
    tax.check_vector(x, "x")?;
    w.check_dim(tax.dim())?;
    model.check_taxonomy(tax)
}

/// Closed-form `F`-best response.
pub fn best_response(
    x: &[f64],
    w: &LinearModel,
    model: &CostModel,
    tax: &FeatureTaxonomy,
    family: Family,
) -> Result<BestResponseResult> {
    check_inputs(x, w, model, tax)?;
    let mut result = BestResponseResult::unmoved(x, w, family);
    if result.predicted_before == 1 {
        return Ok(result);
    }
    let c = effective_variance(w, model, tax, family);
    if c <= 0.0 {
        return Ok(result);
    }
    let score = result.original_score;
    let cost = score.abs() / c.sqrt();
    if cost > MAX_GAIN {
        return Ok(result);
    }
    let u = cov_times_weights(&w.weights, model, tax, family);
    let step = score / c;
    for k in tax.family_indices(family) {
        result.adapted[k] -= step * u[k];
    }
    result.adapted_score = w.score(&result.adapted);
    result.cost_incurred = cost;
    result.moved = true;
    Ok(result)
}
