use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("labeling function {lf_id:?} needs propagation scores but none were attached")]
    MissingPropagationScores { lf_id: String },

    #[error("recall undefined: no gold points of class {label}")]
    UndefinedRecall { label: i8 },

    #[error("dataset lacks class {label}")]
    MissingClass { label: i8 },

    #[error("graph error: {0}")]
    Graph(String),

    #[error("label model error: {0}")]
    LabelModel(String),

    #[error("training diverged at epoch {epoch}: non-finite {what} (learning rate too high?)")]
    Diverged { epoch: usize, what: &'static str },

    #[error("width mismatch: model expects {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("fusion error: {0}")]
    Fusion(String),

    #[error("metric error: {0}")]
    Metric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
