//! Crate-wide error type.

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the localization pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A mathematical-domain violation (altitude outside model validity,
    /// zero distance where a derivative is required, and so on).
    #[error("domain error: {0}")]
    Domain(String),

    /// A malformed or inconsistent configuration value or file.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed external data (CSV tables, distance lists).
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Builds a [`Error::Domain`] from anything displayable.
    pub fn domain(msg: impl std::fmt::Display) -> Self {
        Error::Domain(msg.to_string())
    }

    /// Builds a [`Error::Config`] from anything displayable.
    pub fn config(msg: impl std::fmt::Display) -> Self {
        Error::Config(msg.to_string())
    }

    /// Builds a [`Error::Parse`] from anything displayable.
    pub fn parse(msg: impl std::fmt::Display) -> Self {
        Error::Parse(msg.to_string())
    }
}
