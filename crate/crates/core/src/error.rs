//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by samplers, models and estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid distribution, kernel or estimator parameter.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Input outside the declared domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Operands live on incompatible grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The estimator target is degenerate (zero variance, constant set, ...).
    #[error("degenerate: {0}")]
    Degenerate(String),

    /// Malformed external data.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
