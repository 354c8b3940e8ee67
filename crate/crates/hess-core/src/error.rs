//! Crate-wide error type.
//!
//! Errors are split by how the caller is expected to react: `Argument` and
//! `Domain` are programming/input mistakes, `Metric`/`Admissibility` point at a
//! grid location where the data left the admissible set, `Numeric` covers
//! iterative machinery that failed to meet its contract, and `Sampling` covers
//! rejection sampling that starved.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched dimensions, out-of-range indices, invalid configuration values.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Evaluation requested outside the domain of definition (e.g. outside the cone).
    #[error("domain error: {0}")]
    Domain(String),

    /// Metric is not symmetric positive definite at a grid point.
    #[error("metric not positive definite at grid point {index:?}")]
    MetricNotSpd { index: Vec<usize> },

    /// An iterate left the admissible set at a grid point.
    #[error("inadmissible state at grid point {index:?} (cone margin {margin:.3e})")]
    Inadmissible { index: Vec<usize>, margin: f64 },

    /// Linear or nonlinear iteration failed to meet its accuracy contract.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Rejection sampling accepted too small a fraction of draws.
    #[error("sampling failure: {0}")]
    Sampling(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
