use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("index {index} out of range for {len} inputs")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("factorization failed even with jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("evidence maximization failed: {0}")]
    Evidence(String),

    #[error("non-finite log density at initialization")]
    NonFiniteInit,

    #[error("divergence rate {rate:.3} exceeds the allowed {limit:.3}")]
    TooManyDivergences { rate: f64, limit: f64 },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("synthetic pair construction failed: {0}")]
    Synthetic(String),

    #[error("missing truth oracle")]
    MissingTruth,
}
