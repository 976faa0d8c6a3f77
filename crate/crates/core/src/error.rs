use thiserror::Error;

use crate::series::EvalResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the domain of an operation (pole, vanishing radical,
    /// failed convergence guard, divergent grouping).
    #[error("domain error: {0}")]
    Domain(String),

    /// Truncation caps were reached before the requested accuracy was met.
    /// The partial result, when available, carries the budget reached so far.
    #[error("not converged: {reason}")]
    NotConverged {
        reason: String,
        partial: Option<Box<EvalResult>>,
    },

    #[error("table capacity exceeded: n_max {requested} > limit {limit}")]
    Capacity { requested: u64, limit: u64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cache file {path}: {reason}")]
    Cache { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn not_converged(reason: impl Into<String>, partial: Option<EvalResult>) -> Self {
        Error::NotConverged {
            reason: reason.into(),
            partial: partial.map(Box::new),
        }
    }
}
