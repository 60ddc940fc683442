use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sequence: at least one token is required")]
    EmptySequence,

    #[error("shape error: {0}")]
    Shape(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("invalid merge plan: {0}")]
    InvalidPlan(String),

    #[error("plan/trace mismatch: {0}")]
    TraceMismatch(String),

    #[error("batch elements disagree on token count: expected {expected}, got {got} at element {index}")]
    BatchShape {
        expected: usize,
        got: usize,
        index: usize,
    },

    #[error("provenance corrupted: {0}")]
    Corruption(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("undefined THD: fundamental bin {0} carries no power")]
    UndefinedThd(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("ingestion error in {path}: {message}")]
    Ingest { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Schedule(_) => 2,
            Error::Ingest { .. } => 3,
            _ => 4,
        }
    }

    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptySequence => "empty_sequence",
            Error::Shape(_) => "shape",
            Error::Parameter(_) => "parameter",
            Error::InvalidPlan(_) => "invalid_plan",
            Error::TraceMismatch(_) => "trace_mismatch",
            Error::BatchShape { .. } => "batch_shape",
            Error::Corruption(_) => "corruption",
            Error::Schedule(_) => "schedule",
            Error::Contract(_) => "contract_violation",
            Error::UndefinedThd(_) => "undefined_thd",
            Error::Config(_) => "config",
            Error::Ingest { .. } => "data",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
