use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for capacity {capacity}")]
    IndexOutOfRange { index: usize, capacity: usize },

    #[error("invalid weight {0}: must be finite and non-negative")]
    InvalidWeight(f64),

    #[error("query value {value} outside [0, {total})")]
    QueryOutOfRange { value: f64, total: f64 },

    #[error("structure is empty")]
    Empty,

    #[error("buffer is full (capacity {0})")]
    Capacity(usize),

    #[error("candidate count {requested} not in 1..={capacity}")]
    CandidateCount { requested: usize, capacity: usize },

    #[error("invalid state: {0}")]
    State(String),

    #[error("slot {0} is not occupied")]
    Slot(usize),

    #[error("parameter shape mismatch: expected {expected:?}, found {found:?}")]
    Shape { expected: Vec<usize>, found: Vec<usize> },

    #[error("episode has finished; call reset first")]
    EpisodeFinished,

    #[error("action {action} out of range for {count} actions")]
    InvalidAction { action: usize, count: usize },

    #[error("snapshot token rejected: {0}")]
    Token(String),

    #[error("state recycling failed: every candidate was skipped")]
    RecycleFailed,

    #[error("config error{}: {message}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("report error: {0}")]
    Report(String),

    #[error("malformed parameter file: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn config_at(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line: Some(line),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
