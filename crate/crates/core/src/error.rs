use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed JSON: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("record {record}: invalid field `{field}`: {message}")]
    Validation {
        record: String,
        field: String,
        message: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("overlapping entity mentions `{first}` and `{second}` in {record}")]
    OverlappingEntities {
        record: String,
        first: String,
        second: String,
    },

    #[error("span {start}..{end} cannot be mapped: {reason}")]
    Unmappable {
        start: usize,
        end: usize,
        reason: String,
    },

    #[error("trigger `{trigger}` ({event_id}) does not align to subtoken boundaries")]
    Labeling { event_id: String, trigger: String },

    #[error("unsupported capability: {0}")]
    Capability(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("missing artifact {path}; run `{command}` first")]
    MissingPrerequisite { path: PathBuf, command: String },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
