//! Error type shared by every module in the crate.

use thiserror::Error;

/// Anything that can go wrong while assembling operators or running a scheme.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller handed us something structurally unusable (wrong sizes, bad
    /// parameter ranges, unsupported combinations).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical contract failed at run time: a solve did not converge,
    /// a closure denominator vanished, a CFL precondition was violated.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Problems with experiment configuration files.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
