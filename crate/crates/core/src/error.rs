use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (shape mismatch, out-of-range
    /// parameter, infeasible request).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A linear solve or factorization failed even after regularization.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Training data too degenerate to proceed (e.g. the inducing-point
    /// shrink loop bottomed out with the smoothing criterion still unmet).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A file did not match its declared format.
    #[error("format error: {0}")]
    Format(String),

    /// An archive was written by an unknown format version.
    #[error("unsupported archive version {found} (supported: {supported})")]
    Version { found: u64, supported: u64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
