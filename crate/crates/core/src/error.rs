use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::lexicon::EntityType;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("lexicon contains no valid rows")]
    EmptyLexicon,

    #[error("no replacement candidate of type {0}")]
    NoCandidate(EntityType),

    #[error("text contains no lexicon entities")]
    NoEntities,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("sample ids do not match: {0}")]
    IdMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
