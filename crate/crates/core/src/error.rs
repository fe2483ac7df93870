use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Factorization hit a non-positive pivot.
    #[error("singular matrix: non-positive pivot {value:e} at index {index}")]
    SingularMatrix { index: usize, value: f64 },

    #[error("estimation failed: {reason} (grid argmax {fallback})")]
    EstimationFailure { reason: String, fallback: f64 },

    #[error("experiment aborted: {failures} of {trials} estimations failed")]
    TooManyFailures { failures: usize, trials: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
