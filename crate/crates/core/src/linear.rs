//! Linear scoring model `h(x) = sign(w0 + w·x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intercept plus one weight per feature, in taxonomy order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
}

impl LinearModel {
    pub fn new(intercept: f64, weights: Vec<f64>) -> Self {
        Self { intercept, weights }
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(0.0, vec![0.0; d])
    }

    /// Builds a model from a packed parameter vector `[w0, w1, .., wd]`.
    pub fn from_params(params: &[f64]) -> Self {
        Self::new(params[0], params[1..].to_vec())
    }

    pub fn to_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.weights.len() + 1);
        p.push(self.intercept);
        p.extend_from_slice(&self.weights);
        p
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if self.weights.len() != d {
            return Err(Error::dim("model weights", d, self.weights.len()));
        }
        Ok(())
    }

    /// `w^T x` over the augmented vector `[1 | x]`.
    pub fn score(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.weights.len());
        self.intercept + dot(&self.weights, x)
    }

    /// `sign(w^T x)` with `sign(0) = +1`.
    ///
    /// Scores within floating-point rounding of zero count as zero, so a
    /// subject projected onto the decision boundary is accepted.
    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.score(x) >= -self.score_tolerance(x) {
            1
        } else {
            -1
        }
    }

    /// Rounding-error bound on [`LinearModel::score`] for this input.
    pub fn score_tolerance(&self, x: &[f64]) -> f64 {
        let magnitude: f64 = self.intercept.abs()
            + self
                .weights
                .iter()
                .zip(x)
                .map(|(w, v)| (w * v).abs())
                .sum::<f64>();
        64.0 * f64::EPSILON * magnitude
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_round_trip() {
        let m = LinearModel::new(0.5, vec![1.0, -2.0]);
        assert_eq!(LinearModel::from_params(&m.to_params()), m);
    }

    #[test]
    fn zero_score_is_accepted() {
        let m = LinearModel::new(1.0, vec![1.0]);
        assert_eq!(m.predict(&[-1.0]), 1);
        assert_eq!(m.predict(&[-1.0 - 1e-9]), -1);
    }

    #[test]
    fn positive_rescaling_keeps_decisions() {
        let m = LinearModel::new(-0.3, vec![0.7, -1.1]);
        let scaled = LinearModel::new(-0.3 * 7.5, vec![0.7 * 7.5, -1.1 * 7.5]);
        for x in [[0.0, 0.0], [1.0, 0.2], [-2.0, 1.0], [0.5, 0.1]] {
            assert_eq!(m.predict(&x), scaled.predict(&x));
        }
    }
}
