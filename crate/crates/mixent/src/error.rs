//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by mixture construction, estimation, and data ingestion.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A covariance matrix is not symmetric within tolerance.
    #[error("covariance matrix is not symmetric (max relative asymmetry {max_asym:.3e})")]
    NotSymmetric { max_asym: f64 },

    /// A covariance matrix has a non-positive eigenvalue.
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    /// A component weight is outside (0, 1] or the weights do not sum to one.
    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),

    /// A mixture must contain at least one component.
    #[error("mixture has no components")]
    EmptyMixture,

    /// Input is degenerate for the requested operation.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The operation does not support the requested dimension.
    #[error("unsupported dimension {dim} (maximum {max})")]
    UnsupportedDimension { dim: usize, max: usize },

    /// Splitting would exceed the configured component cap.
    #[error("component cap exceeded: splitting would produce {would_be} components (cap {cap})")]
    ComponentCapExceeded { would_be: usize, cap: usize },

    /// Not enough samples to estimate the requested statistic.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    /// A numeric operation failed (singular factorization, overflow, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Malformed input data (CSV/JSON contents).
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by malformed or out-of-contract inputs, as
    /// opposed to numeric/resource failures during computation.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::Numeric(_) | Error::ComponentCapExceeded { .. }
        )
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
