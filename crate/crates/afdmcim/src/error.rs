use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Input lengths or shapes do not match what the operation expects.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A search or enumeration would exceed the hard sizing guard.
    #[error("search space too large: {0}")]
    TooLarge(String),
    /// A built-in consistency check did not hold.
    #[error("selftest failed: {0}")]
    Selftest(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
