use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series contains a non-finite value at position {0}")]
    NonFinite(usize),

    #[error("empty series")]
    EmptySeries,

    #[error("insufficient history for lag order p={p} (series length {len})")]
    InsufficientHistory { p: usize, len: usize },

    #[error("log returns need strictly positive prices; got {value} at position {index}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("oracle enumeration capped at N <= {cap} (got N={n})")]
    EnumerationCapped { n: usize, cap: usize },

    #[error("no tree covered the query point")]
    EmptyCoverage,

    #[error("need at least {needed} replicates, got {got}")]
    TooFewReplicates { needed: usize, got: usize },

    #[error("{path}: column `{column}` not found")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: bad value {value:?} at data row {row}")]
    BadValue {
        path: PathBuf,
        row: usize,
        value: String,
    },

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("replicate {replicate} of scenario {scenario} failed: {source}")]
    Replicate {
        scenario: String,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
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

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
