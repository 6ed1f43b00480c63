//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input rejected before any computation started.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A numerical procedure failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A root bracket did not contain a sign change, or contained several.
    #[error("bracket failure: {0}")]
    Bracket(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
    pub fn bracket(msg: impl Into<String>) -> Self {
        Error::Bracket(msg.into())
    }
}
