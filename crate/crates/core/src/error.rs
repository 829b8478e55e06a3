use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: missing column `{column}`")]
    MissingColumn { column: String },

    #[error("parse error at row {row}, column `{column}`: cannot parse {value:?}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("duplicate key `{key}` at row {row}")]
    DuplicateKey { key: String, row: usize },

    #[error("malformed session `{session_id}`: {reason}")]
    MalformedSession { session_id: String, reason: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("unknown track `{track_id}` referenced at row {row}")]
    UnknownTrack { track_id: String, row: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("model format error at line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors caused by the input data rather than by the caller.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_) | Error::Io(_))
    }
}
