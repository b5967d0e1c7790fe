use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix `{which}` is not positive definite")]
    NotPositiveDefinite { which: &'static str },

    #[error("dimension mismatch: {context} (expected {expected}, got {actual})")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("immutable feature `{feature}` changed from {from} to {to}")]
    ImmutableViolation { feature: String, from: f64, to: f64 },

    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("no valid cost-reducing perturbation: {0}")]
    NoValidPerturbation(String),

    #[error("cost models are not ordered: {0}")]
    OrderingViolation(String),

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("training data contains a single class")]
    SingleClassData,

    #[error("objective evaluated to a non-finite value")]
    NonFiniteLoss,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset has no oracle for true labels")]
    NoOracle,

    #[error("too few rows: {n} rows cannot be split into {k} folds")]
    TooFewRows { n: usize, k: usize },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("unknown label value {0:?}")]
    UnknownLabelValue(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("lambda {lambda}: {source}")]
    Sweep {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        }
    }
}
