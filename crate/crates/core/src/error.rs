use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller broke a documented precondition (shape, range, parameter).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Input is structurally fine but numerically meaningless (all-zero
    /// power, non-finite values, empty estimate).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// The request would exceed a configured size cap; the message names the
    /// cap and, where useful, the mode to fall back to.
    #[error("{0}")]
    TooLarge(String),
    /// A file could not be decoded (bad magic, version, or field).
    #[error("parse error: {0}")]
    Parse(String),
    /// An iterative procedure left its stable region and was aborted.
    #[error("diverged: {0}")]
    Diverged(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
