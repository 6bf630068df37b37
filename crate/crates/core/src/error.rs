use thiserror::Error;

use crate::event::EventId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fingerprint mismatch: artifact built with {expected}, got {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("line {line_no}: timestamp required by time-based window is missing")]
    MissingTimestamp { line_no: u64 },

    #[error("training data must be all-normal, but sequence {sequence_id} is labeled anomalous")]
    AnomalousTrainingRow { sequence_id: String },

    #[error("validation set empty")]
    EmptyValidation,

    #[error("training set empty")]
    EmptyTraining,

    #[error("event {0} is not part of the template vocabulary")]
    UnknownEvent(EventId),

    #[error("schema mismatch: missing columns {missing:?}, unexpected columns {unexpected:?}")]
    SchemaMismatch {
        missing: Vec<EventId>,
        unexpected: Vec<EventId>,
    },

    #[error("row {row} ({sequence_id}), event {event}: {source}")]
    AtRow {
        row: usize,
        sequence_id: String,
        event: EventId,
        #[source]
        source: Box<Error>,
    },

    #[error("sequence ids diverge at position {index}: verdict {verdict:?}, label {label:?}")]
    IdMismatch {
        index: usize,
        verdict: Option<String>,
        label: Option<String>,
    },

    #[error("invalid conditional independence test: {0}")]
    InvalidCiTest(String),

    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {error}")]
    File {
        path: String,
        error: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Regex(#[from] regex::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
