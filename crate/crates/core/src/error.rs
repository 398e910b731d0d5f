use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: schema error: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: duplicate id `{id}`")]
    DuplicateKey { path: PathBuf, line: usize, id: String },

    #[error("record `{id}` has no content after removing empty posts")]
    EmptyContent { id: String },

    #[error("document for `{id}` is empty after cleaning")]
    EmptyDocument { id: String },

    #[error("document `{id}` has no in-vocabulary tokens")]
    AllOov { id: String },

    #[error("{path}:{line}: embedding format error: {message}")]
    EmbeddingFormat {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("no source item has average similarity above {threshold}; {total} candidates (max average similarity {max_similarity:.4}); try a lower threshold")]
    EmptySelection {
        threshold: f64,
        total: usize,
        max_similarity: f64,
    },

    #[error("{}{}: {source}", stage, fold.map(|f| format!(" (fold {f})")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        fold: Option<usize>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the pipeline stage (and fold) it came from.
    pub fn in_stage(self, stage: &'static str, fold: Option<usize>) -> Self {
        Error::Stage {
            stage,
            fold,
            source: Box::new(self),
        }
    }

    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
