use awt_core::AwtError;
use thiserror::Error;

/// CLI failure, carrying the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or flag combinations (exit 1).
    #[error("usage error: {0}")]
    Usage(String),
    /// Unreadable or invalid input data (exit 2).
    #[error("data error: {0}")]
    Data(String),
    /// Anything else (exit 3).
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Internal(_) => 3,
        }
    }

    pub fn data(msg: impl std::fmt::Display) -> Self {
        Self::Data(msg.to_string())
    }

    pub fn internal(msg: impl std::fmt::Display) -> Self {
        Self::Internal(msg.to_string())
    }
}

impl From<AwtError> for CliError {
    fn from(e: AwtError) -> Self {
        match e {
            AwtError::InvalidConfig(_) | AwtError::LevelRange { .. } => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
