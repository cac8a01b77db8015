use thiserror::Error;

/// Errors raised by the solver and its diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size mismatch: expected {expected} atoms, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible: {reason}")]
    Infeasible {
        reason: String,
        /// Largest achievable value, when the failure is a target beyond a supremum.
        supremum: Option<f64>,
    },

    #[error("indeterminate: {reason} (best bracket [{lo}, {hi}])")]
    Indeterminate { reason: String, lo: f64, hi: f64 },

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn infeasible(reason: impl Into<String>) -> Self {
        Error::Infeasible {
            reason: reason.into(),
            supremum: None,
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, found })
    }
}
