use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid construction parameters (grid sizes, budgets, ranges).
    #[error("configuration error: {0}")]
    Config(String),
    /// An operation was called on inputs that do not fit together
    /// (wrong representation, mismatched grids or shapes).
    #[error("usage error: {0}")]
    Usage(String),
    /// A numeric argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A computed quantity violated an internal consistency check.
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
