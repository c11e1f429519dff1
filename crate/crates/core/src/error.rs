use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: row {row}, column `{column}`: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("invalid block model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("sequence is not a permutation of the {expected} stage-bench units")]
    NotAPermutation { expected: usize },

    #[error("schedule needs {required} periods but the horizon is {horizon}")]
    HorizonExceeded { required: usize, horizon: usize },

    #[error("period {period} is outside the horizon 1..={horizon}")]
    PeriodOutOfRange { period: usize, horizon: usize },

    #[error("ensemble size mismatch: expected {expected} members, found {found}")]
    MemberMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no individual in the initial population decodes within the horizon of {horizon} periods")]
    Infeasible { horizon: usize },

    #[error("schedule does not match the reserve: {0}")]
    IncompatibleSchedule(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
