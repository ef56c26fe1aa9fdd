use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GsalError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GsalError {
    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("concept graph has no fine-level nodes")]
    NoFineConcepts,

    #[error("concept graph has no nodes at level {0}")]
    EmptyLevel(&'static str),

    #[error("unknown concept node `{0}`")]
    UnknownNode(String),

    #[error("node `{id}` is at level {actual}, expected {expected}")]
    WrongLevel {
        id: String,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),

    #[error("cycle detected in concept graph involving node `{0}`")]
    Cycle(String),

    #[error("fine node `{0}` has no coarse parent")]
    OrphanFine(String),

    #[error("fine node `{0}` has no embedding")]
    MissingEmbedding(String),

    #[error("node `{id}`: {reason}")]
    InvalidNode { id: String, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cannot score an empty list")]
    EmptyInput,

    #[error("batch size {k} exceeds pool size {pool}")]
    BatchTooLarge { k: usize, pool: usize },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("score file row {row}: {reason}")]
    ScoreRow { row: usize, reason: String },

    #[error("no generative scores for {} item(s): {}", ids.len(), ids.join(", "))]
    ProviderMiss { ids: Vec<String> },

    #[error("detector confidence {value} of `{id}` is outside [0, 1]")]
    ConfidenceRange { id: String, value: f64 },

    #[error("infeasible pool spec: {0}")]
    InfeasibleSpec(String),

    #[error("sample `{0}` is already labeled")]
    AlreadyLabeled(String),

    #[error("unknown sample `{0}`")]
    UnknownSample(String),

    #[error("invalid config: {path}: {reason}")]
    Config { path: String, reason: String },

    #[error("{path}: {reason}")]
    Report { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl GsalError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GsalError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        GsalError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than a failure at run time.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            GsalError::Io { .. } | GsalError::ProviderMiss { .. } | GsalError::Report { .. }
        )
    }
}
