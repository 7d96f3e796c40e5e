use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: expected {expected} comma-separated fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: empty label")]
    EmptyLabel { line: usize },

    #[error("unmapped attack name {name:?}")]
    UnmappedAttack { name: String },

    #[error("label-map line {line}: {reason}")]
    LabelMap { line: usize, reason: String },

    #[error("field {field}: cannot parse {value:?} as a number")]
    NumericField { field: usize, value: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{0} must not be empty")]
    EmptyInput(&'static str),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid cost matrix: {0}")]
    InvalidCostMatrix(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("no class score is finite for this input")]
    DegeneratePosterior,

    #[error("all {0} grid candidates failed to train")]
    AllCandidatesFailed(usize),

    #[error("unsupported {what} {found:?} (expected {expected})")]
    Format {
        what: &'static str,
        found: String,
        expected: &'static str,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
