use std::path::PathBuf;

/// Errors produced by the simulation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point {point:?} is outside the domain {domain}")]
    DomainViolation { point: Vec<f64>, domain: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("rounds must be submitted in order: expected round {expected}, got {got}")]
    OutOfOrder { expected: usize, got: usize },

    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
