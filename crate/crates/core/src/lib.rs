//! Linear classifiers that anticipate how decision subjects adapt their
//! features, separating genuine improvement from manipulation.
//!
//! The building blocks are a Mahalanobis [`CostModel`] over a typed
//! [`FeatureTaxonomy`], the closed-form [`best_response`] of a subject, and
//! trainers in [`training`] that fit against those responses. The
//! [`evaluation`] module measures test error, deployment error under
//! manipulation and the improvement rate.

pub mod best_response;
pub mod cost_model;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod linear;
pub mod par;
pub mod seed;
pub mod training;

pub use best_response::{best_response, oracle_best_response, BestResponseResult};
pub use cost_model::{cost, effective_variance, CostModel, CostSpec, Family, Feature, FeatureKind, FeatureTaxonomy};
pub use datasets::{generate_toy, make_folds, Dataset, FoldPlan, LabelSpec, ToyParams};
pub use error::{Error, Result};
pub use evaluation::{cross_validate, evaluate, lambda_sweep, CVSummary, EvalOptions, EvalReport, SweepResult};
pub use linear::LinearModel;
pub use par::Exec;
pub use training::{fit, FitResult, Method, TrainConfig, TrainedModel};
