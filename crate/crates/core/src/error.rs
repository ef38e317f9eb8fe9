use std::path::PathBuf;

/// Errors produced by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unnormalizable amplitude vector")]
    UnnormalizableAmplitude,

    #[error("angle out of range: feature {index} has value {value}")]
    AngleOutOfRange { index: usize, value: f64 },

    #[error("qubit count mismatch: {left} vs {right}")]
    QubitMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("labels contain a single class")]
    SingleClass,

    #[error("svm solver did not converge after {iterations} iterations (max KKT violation {max_violation:.3e})")]
    NotConverged { iterations: usize, max_violation: f64 },

    #[error("ridge penalty must be nonnegative, got {0}")]
    NegativeLambda(f64),

    #[error("cannot split {features} features into {groups} groups")]
    TooManyGroups { groups: usize, features: usize },

    #[error("groupings have mismatched shapes")]
    GroupShapeMismatch,

    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate sample id `{0}`")]
    DuplicateSampleId(String),

    #[error("no usable features")]
    NoUsableFeatures,

    #[error("log-transform domain: feature `{feature}` has negative value {value}")]
    LogDomain { feature: String, value: f64 },

    #[error("requested {requested} principal components but at most {available} are available")]
    PcaRank { requested: usize, available: usize },

    #[error("class {class} has {count} samples, fewer than the {folds} folds requested")]
    ClassTooSmall {
        class: &'static str,
        count: usize,
        folds: usize,
    },

    #[error("fold count must be at least 2, got {0}")]
    FoldCount(usize),

    #[error("every C candidate failed to train: {0}")]
    AllCandidatesFailed(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
