use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A quantity was outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Index outside a tabulated range.
    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    /// Input failed a structural validation check.
    #[error("validation error: {0}")]
    Validation(String),

    /// An iterative computation failed to converge.
    #[error("no convergence after {iterations} iterations (partial result {partial:e})")]
    NoConvergence { iterations: usize, partial: f64 },

    /// The ODE integrator could not complete.
    #[error("integration failure: {0}")]
    Integration(String),

    /// A fit could not be performed on the supplied data.
    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
