use thiserror::Error;

use crate::solver::SolveResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty sample")]
    EmptySample,

    #[error("poisson solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    PoissonNotConverged { iterations: usize, residual: f64 },

    /// The minimizer stopped early. The best iterate and its diagnostics are attached.
    #[error("solver did not converge: {reason}")]
    NotConverged {
        reason: String,
        result: Box<SolveResult>,
    },

    #[error("oracle did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    OracleNotConverged { iterations: usize, grad_norm: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(what: impl Into<String>) -> Self {
        Error::ShapeMismatch(what.into())
    }

    pub(crate) fn invalid(what: impl Into<String>) -> Self {
        Error::InvalidArgument(what.into())
    }
}
