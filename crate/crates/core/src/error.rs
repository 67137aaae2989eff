use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric input fell outside the range the operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}:{line}: {message}")]
    Log {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Network-level failure talking to a chat backend. Retrying later may succeed.
    #[error("transport error: {message}")]
    Transport { message: String, retryable: bool },

    /// The backend answered, but not with a well-formed chat completion.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// No preference could be read after the maximum number of attempts.
    #[error("invalid trial: no preference in {} replies", replies.len())]
    InvalidTrial { replies: Vec<String> },

    #[error("intervention generation failed after {attempts} attempts")]
    GenerationFailed { attempts: u32 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The statistic has no value for this input (zero variance and similar).
    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport { retryable: true, .. })
    }

    /// Errors that invalidate a single trial rather than the whole run.
    pub fn is_trial_local(&self) -> bool {
        matches!(self, Error::InvalidTrial { .. } | Error::GenerationFailed { .. })
    }
}
