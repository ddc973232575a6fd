//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by evaluators, samplers and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A domain description violates its invariants.
    #[error("invalid domain: {0}")]
    Domain(String),
    /// A point lies outside the domain where the operation is defined.
    #[error("point ({re}, {im}) is not in the domain: {what}")]
    Outside { re: f64, im: f64, what: String },
    /// An argument is out of range or malformed.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Evaluation at a singularity of a kernel.
    #[error("singular evaluation: {0}")]
    Singular(String),
    /// A sampler ran out of its step budget.
    #[error("step budget of {0} steps exhausted")]
    StepBudget(u64),
    /// An iterative method or quadrature failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A configuration file is malformed.
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn outside(z: num_complex::Complex64, what: impl Into<String>) -> Self {
        Error::Outside { re: z.re, im: z.im, what: what.into() }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Outside { .. } | Error::InvalidArgument(_) | Error::Config(_) | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
