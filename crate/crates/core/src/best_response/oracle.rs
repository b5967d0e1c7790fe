use nalgebra::{DMatrix, DVector};

use super::{check_inputs, BestResponseResult, MAX_GAIN};
use crate::cost_model::{cost, CostModel, Family, FeatureTaxonomy};
use crate::error::Result;
use crate::linear::LinearModel;

/// Best response obtained by solving the equality-constrained minimization
///
/// ```text
/// min_{x_F'} (x_F - x_F')^T S_F^{-1} (x_F - x_F')   s.t.   w^T x' = 0
/// ```
///
/// through its KKT system with a dense LU solve. Shares no algebra with the
/// closed form beyond the cost gate, so it serves as a cross-check.
///
/// A singular KKT matrix (all `w_F = 0`) means no move is possible.
pub fn oracle_best_response(
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
    let idx = tax.family_indices(family);
    let n = idx.len();
    if n == 0 || idx.iter().all(|&k| w.weights[k] == 0.0) {
        return Ok(result);
    }

    let inv = model.inv_cov_family(family);
    let xf = DVector::from_iterator(n, idx.iter().map(|&k| x[k]));
    let wf = DVector::from_iterator(n, idx.iter().map(|&k| w.weights[k]));
    let fixed_part = result.original_score - wf.dot(&xf);

    let mut kkt = DMatrix::<f64>::zeros(n + 1, n + 1);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(&inv * 2.0));
    kkt.view_mut((0, n), (n, 1)).copy_from(&wf);
    kkt.view_mut((n, 0), (1, n)).copy_from(&wf.transpose());
    let mut rhs = DVector::<f64>::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from(&(&inv * &xf * 2.0));
    rhs[n] = -fixed_part;

    let Some(sol) = kkt.lu().solve(&rhs) else {
        return Ok(result);
    };
    let mut adapted = x.to_vec();
    for (a, &k) in idx.iter().enumerate() {
        adapted[k] = sol[a];
    }
    let c = cost(x, &adapted, model, tax)?;
    if c > MAX_GAIN {
        return Ok(result);
    }
    result.adapted_score = w.score(&adapted);
    result.adapted = adapted;
    result.cost_incurred = c;
    result.moved = true;
    Ok(result)
}
