use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    /// A numerical check that is expected to hold did not.
    #[error("verification failed: {0}")]
    Verification(String),
    /// The working precision could not certify the result.
    #[error("insufficient precision: {0}")]
    Precision(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
