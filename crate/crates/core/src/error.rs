use thiserror::Error;

/// Failures raised by a model backend.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no fixture for prompt: {0:?}")]
    FixtureMiss(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid params: {field}: {reason}")]
    InvalidParams { field: String, reason: String },

    #[error("degenerate distribution")]
    DegenerateDistribution,

    #[error("no effective evidence")]
    NoEffectiveEvidence,

    #[error("empty explanation")]
    EmptyExplanation,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    InFile { path: String, source: Box<Error> },

    #[error("{0}")]
    Codec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid_params(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParams {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn is_backend(&self) -> bool {
        matches!(self, Error::Backend(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
