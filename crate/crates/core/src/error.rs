//! Error type shared by every module, with the exit-code mapping used by the CLI.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a documented precondition (shape mismatch, bad range, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An iterative routine failed to converge.
    #[error("{op} did not converge after {iterations} iterations")]
    NonConvergence { op: &'static str, iterations: usize },

    /// A numerical failure at runtime (NaN loss, diverged activations, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed on-disk data: bad magic, truncated payload, ragged CSV.
    #[error("data format error: {0}")]
    Format(String),

    /// Bad user-supplied configuration (unknown keys, missing fields, bad values).
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 usage/config, 3 data format, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Contract(_) | Error::Config(_) => 2,
            Error::Format(_) | Error::Io(_) => 3,
            Error::NonConvergence { .. } | Error::Numerical(_) => 4,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
