//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A problem, estimator, or study was configured inconsistently
    /// (bad dimensions, bounds, sample counts, missing keys, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A vector had the wrong length for the declared problem dimensions.
    #[error("dimension mismatch: expected {expected} for {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A forward-model or likelihood evaluation produced a non-finite value.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// Rejection sampling exhausted its attempt budget (pathological
    /// obstacle masks leave too little accessible area).
    #[error("rejection sampling failed after {attempts} attempts")]
    RejectionExhausted { attempts: usize },

    /// Too many outer Monte Carlo samples had a degenerate (zero)
    /// marginal-likelihood estimate and were dropped.
    #[error("estimation error: {dropped} of {total} outer samples degenerate (limit {limit})")]
    TooManyDegenerate {
        dropped: usize,
        total: usize,
        limit: usize,
    },

    /// Generic estimation failure.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Linear-algebra failure (non-positive-definite kernel matrix after
    /// jitter escalation, tridiagonal breakdown, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A surrogate cache file did not match the requested configuration.
    #[error("cache mismatch: {0}")]
    CacheMismatch(String),
}
