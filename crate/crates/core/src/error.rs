//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or file. Names the offending key.
    #[error("config error: {0}")]
    Config(String),

    /// A simulator precondition was violated (bad agent id, action count
    /// mismatch, unplaceable spawn layout).
    #[error("simulation error: {0}")]
    Sim(String),

    /// Network/parameter shape or mode mismatch.
    #[error("network error: {0}")]
    Net(String),

    /// Checkpoint file is corrupt or incompatible.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// A trajectory log is malformed or violates its invariants.
    #[error("trajectory log error: {0}")]
    Log(String),

    /// Training runtime failure (worker crash, invalid parameter publish).
    #[error("runtime error: {0}")]
    Runtime(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code contract: 1 for validation problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Sim(_) | Error::Net(_) => 1,
            _ => 2,
        }
    }
}
