use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("record {row} has {found} fields, header has {expected}")]
    Arity {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("table has no data rows")]
    EmptyTable,

    #[error("cannot parse {value:?} at row {row}, column {col} ({name})")]
    Parse {
        row: usize,
        col: usize,
        name: String,
        value: String,
    },

    #[error("level {value:?} at row {row}, column {col} ({name}) is not in the schema")]
    UnknownLevel {
        row: usize,
        col: usize,
        name: String,
        value: String,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no row is out-of-bag for any tree")]
    NoOobRows,

    #[error("evidence is not supported by any leaf")]
    EvidenceUnsupported,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
