use std::io;

use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Invalid configuration or misuse of an API contract.
    #[error("invalid config: {0}")]
    Config(String),

    /// Stored data disagrees with what was recomputed or checksummed.
    #[error("integrity check failed: {0}")]
    Integrity(String),

    /// Episode lifecycle violation, e.g. stepping a finished environment.
    #[error("lifecycle error: {0}")]
    Lifecycle(String),

    /// A NaN or infinity showed up where only finite values are allowed.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// An operation was asked to work on an empty dataset.
    #[error("no data: {0}")]
    NoData(String),

    /// Numerical failure such as a singular linear system.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors a user fixes by editing the config file.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
