use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A primitive was applied to tensors whose shapes do not conform.
    #[error("shape mismatch in `{primitive}`: {details}")]
    ShapeMismatch {
        primitive: &'static str,
        details: String,
    },

    /// A documented precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid user-supplied data (corpus, transition matrix, gamma, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Bad configuration file or unknown/invalid keys.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Corrupt, truncated, or wrong-kind checkpoint.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code for the CLI: 2 config, 3 i/o, 4 contract/data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
