use thiserror::Error;

use crate::twin::TwinError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },

    #[error("record {index}: {message}")]
    SchemaViolation { index: usize, message: String },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("degenerate action binning for `{column}`: {reason}")]
    DegenerateBinning { column: String, reason: String },

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("invalid hypothesis: {0}")]
    InvalidHypothesis(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("twin data is tagged with actions {found:?} but the hypothesis requires {expected:?}")]
    ActionTagMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("invalid world: {0}")]
    InvalidWorld(String),

    #[error("conditioning event has zero probability under the interventional law")]
    ZeroProbabilityEvent,

    #[error("construction precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Twin(#[from] TwinError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by bad user input (files, schemas, arguments),
    /// as opposed to failures while running a stage.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::SchemaViolation { .. }
                | Error::InvalidSchema(_)
                | Error::UnknownFeature(_)
                | Error::InvalidHypothesis(_)
                | Error::InvalidArgument(_)
                | Error::InvalidWorld(_)
                | Error::Json(_)
        )
    }
}
