use thiserror::Error;

/// Errors raised by the laboratory's operations.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("operator failed the symmetry probe (|<u,Av> - <Au,v>| = {defect:e})")]
    AsymmetricOperator { defect: f64 },

    #[error("constraint Gram matrix is numerically singular (points in degenerate position)")]
    SingularGram,

    #[error("unsupported group specification: {0}")]
    UnsupportedGroup(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("config error for key `{key}`: {message}")]
    Schema { key: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
