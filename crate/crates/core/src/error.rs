use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// All accumulated work is zero; the measurement region is broken.
    #[error("degenerate timing window: {0}")]
    DegenerateWindow(String),

    #[error("cannot merge timing windows: {0}")]
    InvalidMerge(String),

    /// `1 - 1/CE` vanishes when an efficiency reaches one.
    #[error("estimator singularity: {0}")]
    Singularity(String),

    #[error("prediction outside the model domain: {0}")]
    OutOfModel(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("requested {requested} cores but the cluster holds {capacity}")]
    Capacity { requested: u32, capacity: u32 },

    #[error("trace sequencing error: step {step} recorded after step {last}")]
    Sequencing { step: u64, last: u64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed trace: {0}")]
    TraceFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
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
