//! Trainers: Static, DropFeatures, ManipulationProof and constructive
//! adaptation (CA), all fitted by BFGS on smooth surrogates.

pub mod bfgs;
mod objective;

pub use objective::{ca_objective, direction_penalty, logistic_loss, Objective, ObjectiveKind, ObjectiveValue};

use std::fmt;

use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::cost_model::{CostModel, FeatureKind, FeatureTaxonomy};
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::linear::LinearModel;
use crate::par::Exec;
use crate::seed::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Static,
    DropFeatures,
    ManipulationProof,
    Ca,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Static, Method::DropFeatures, Method::ManipulationProof, Method::Ca];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Static => "static",
            Method::DropFeatures => "drop_features",
            Method::ManipulationProof => "manipulation_proof",
            Method::Ca => "ca",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "static" | "st" => Ok(Method::Static),
            "drop_features" | "dropfeatures" | "df" => Ok(Method::DropFeatures),
            "manipulation_proof" | "manipulationproof" | "mp" => Ok(Method::ManipulationProof),
            "ca" | "constructive_adaptation" => Ok(Method::Ca),
            _ => Err(Error::InvalidConfig(format!(
                "method: unknown training method `{s}` (expected static, drop_features, manipulation_proof or ca)"
            ))),
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.as_str().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    /// Weight on the improvement term (CA only).
    pub lambda: f64,
    /// Weight on the directional penalty (CA only).
    pub eta: f64,
    pub l2_reg: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Ca,
            lambda: 1.0,
            eta: 0.0,
            l2_reg: 1e-3,
            max_iters: 500,
            grad_tol: 1e-6,
            restarts: 3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Default::default()
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [("lambda", self.lambda), ("eta", self.eta), ("l2_reg", self.l2_reg)];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.grad_tol.is_nan() || self.grad_tol <= 0.0 {
            return Err(Error::InvalidConfig(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be positive".into()));
        }
        Ok(())
    }

    fn objective_kind(&self) -> ObjectiveKind {
        match self.method {
            Method::Static | Method::DropFeatures => ObjectiveKind::Static,
            Method::ManipulationProof => ObjectiveKind::ManipulationProof,
            Method::Ca => ObjectiveKind::ConstructiveAdaptation {
                lambda: self.lambda,
                eta: self.eta,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: LinearModel,
    /// Objective value of the returned model.
    pub loss: f64,
    /// `false` when the best restart hit `max_iters` or stalled in the line
    /// search before reaching `grad_tol`.
    pub converged: bool,
    pub iterations: usize,
    /// Objective values along the returned restart.
    pub trace: Vec<f64>,
}

pub fn fit(data: &Dataset, model: &CostModel, cfg: &TrainConfig) -> Result<FitResult> {
    fit_with(data, model, cfg, Exec::default())
}

/// [`fit`] with an explicit execution strategy for objective evaluation.
pub fn fit_with(data: &Dataset, model: &CostModel, cfg: &TrainConfig, exec: Exec) -> Result<FitResult> {
    cfg.validate()?;
    model.check_taxonomy(data.taxonomy())?;
    if data.n() == 0 || !data.has_both_classes() {
        return Err(Error::SingleClassData);
    }
    if cfg.method == Method::DropFeatures {
        return fit_dropping_manipulable(data, cfg, exec);
    }
    let objective = Objective::new(cfg.objective_kind(), data, model, cfg.l2_reg).with_exec(exec);
    minimize_with_restarts(&objective, cfg)
}

fn fit_dropping_manipulable(data: &Dataset, cfg: &TrainConfig, exec: Exec) -> Result<FitResult> {
    let tax = data.taxonomy();
    let keep: Vec<usize> = (0..tax.dim()).filter(|&k| tax.feature(k).kind != FeatureKind::Manipulable).collect();
    let reduced = data.select_columns(&keep)?;
    let reduced_tax = reduced.taxonomy();
    let unit = CostModel::scaled_identity(reduced_tax.improvable().len(), 1.0, 0, 1.0)?;
    let objective = Objective::new(ObjectiveKind::Static, &reduced, &unit, cfg.l2_reg).with_exec(exec);
    let mut out = minimize_with_restarts(&objective, cfg)?;
    let mut weights = vec![0.0; tax.dim()];
    for (&k, &wk) in keep.iter().zip(&out.model.weights) {
        weights[k] = wk;
    }
    out.model = LinearModel::new(out.model.intercept, weights);
    Ok(out)
}

fn minimize_with_restarts(objective: &Objective<'_>, cfg: &TrainConfig) -> Result<FitResult> {
    let opts = bfgs::BfgsOptions {
        max_iters: cfg.max_iters,
        grad_tol: cfg.grad_tol,
        ..Default::default()
    };
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut best: Option<FitResult> = None;
    for r in 0..cfg.restarts {
        let mut rng = seed::rng(cfg.seed, Stream::Init, r as u64);
        let x0: Vec<f64> = (0..objective.dim()).map(|_| rng.sample(init)).collect();
        let out = bfgs::minimize(
            |p| objective.evaluate(p).map(|v| (v.loss, v.gradient)),
            x0,
            &opts,
        )?;
        log::debug!(
            "restart {r}: loss {:.6} after {} iterations (converged: {})",
            out.f,
            out.iterations,
            out.converged
        );
        if best.as_ref().is_none_or(|b| out.f < b.loss) {
            best = Some(FitResult {
                model: LinearModel::from_params(&out.x),
                loss: out.f,
                converged: out.converged,
                iterations: out.iterations,
                trace: out.trace,
            });
        }
    }
    let best = best.expect("at least one restart");
    if !best.converged {
        log::warn!(
            "{} fit stopped before reaching grad_tol {} (loss {:.6})",
            cfg.method,
            cfg.grad_tol,
            best.loss
        );
    }
    Ok(best)
}

/// Serialized trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub taxonomy_hash: String,
    pub method: Method,
    pub config: TrainConfig,
}

impl TrainedModel {
    pub fn new(model: &LinearModel, tax: &FeatureTaxonomy, config: &TrainConfig) -> Self {
        Self {
            intercept: model.intercept,
            weights: model.weights.clone(),
            taxonomy_hash: tax.hash(),
            method: config.method,
            config: config.clone(),
        }
    }

    pub fn linear(&self) -> LinearModel {
        LinearModel::new(self.intercept, self.weights.clone())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Checks the model was trained against `tax`.
    pub fn check_taxonomy(&self, tax: &FeatureTaxonomy) -> Result<()> {
        if self.weights.len() != tax.dim() {
            return Err(Error::dim("model weights", tax.dim(), self.weights.len()));
        }
        if self.taxonomy_hash != tax.hash() {
            return Err(Error::InvalidTaxonomy(
                "model was trained with a different taxonomy (hash mismatch)".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost_model::Feature;

    #[test]
    fn config_json_defaults_and_errors() {
        let cfg = TrainConfig::from_json(r#"{"method": "manipulation_proof", "lambda": 0.5}"#).unwrap();
        assert_eq!(cfg.method, Method::ManipulationProof);
        assert_eq!(cfg.l2_reg, 1e-3);
        assert_eq!(cfg.max_iters, 500);
        assert_eq!(cfg.restarts, 3);
        let err = TrainConfig::from_json(r#"{"method": "statc"}"#).unwrap_err();
        assert!(err.to_string().contains("method"), "{err}");
        assert!(TrainConfig::from_json(r#"{"lambda": -1}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"grad_tol": 0}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"lamda": 1}"#).is_err());
        let back = TrainConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    fn two_points() -> (Dataset, CostModel) {
        let t = FeatureTaxonomy::new(vec![
            Feature::new("a", FeatureKind::Improvable, 0),
            Feature::new("m", FeatureKind::Manipulable, 0),
        ])
        .unwrap();
        let d = Dataset::new("sep", vec![1.0, 0.3, -1.0, -0.2], vec![1, -1], t).unwrap();
        (d, CostModel::scaled_identity(1, 1.0, 1, 0.2).unwrap())
    }

    #[test]
    fn separable_static_fit() {
        let (d, m) = two_points();
        let fit = fit(&d, &m, &TrainConfig::new(Method::Static)).unwrap();
        for i in 0..d.n() {
            assert_eq!(fit.model.predict(d.row(i)), d.label(i));
        }
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn drop_features_zeroes_manipulable() {
        let (d, m) = two_points();
        let fit = fit(&d, &m, &TrainConfig::new(Method::DropFeatures)).unwrap();
        assert_eq!(fit.model.weights[1], 0.0);
        assert!(fit.model.weights[0] > 0.0);
    }

    #[test]
    fn single_class_rejected() {
        let t = FeatureTaxonomy::new(vec![Feature::new("a", FeatureKind::Improvable, 0)]).unwrap();
        let d = Dataset::new("one", vec![1.0, 2.0], vec![1, 1], t).unwrap();
        let m = CostModel::scaled_identity(1, 1.0, 0, 1.0).unwrap();
        assert!(matches!(fit(&d, &m, &TrainConfig::default()), Err(Error::SingleClassData)));
    }

    #[test]
    fn trained_model_json_shape() {
        let (d, _) = two_points();
        let cfg = TrainConfig::new(Method::Static);
        let tm = TrainedModel::new(&LinearModel::new(0.1, vec![1.0, 2.0]), d.taxonomy(), &cfg);
        let v: serde_json::Value = serde_json::from_str(&tm.to_json()).unwrap();
        for key in ["intercept", "weights", "taxonomy_hash", "method", "config"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["method"], "static");
        assert_eq!(TrainedModel::from_json(&tm.to_json()).unwrap(), tm);
        tm.check_taxonomy(d.taxonomy()).unwrap();
    }
}
