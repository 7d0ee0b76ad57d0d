use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the retrieval-augmented generation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {reason}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("invalid document {id:?}: {reason}")]
    InvalidDocument { id: String, reason: String },

    #[error("vocabulary max size {0} is smaller than the 6 reserved special tokens")]
    VocabTooSmall(usize),

    #[error("document ordinal {ordinal} out of range for index of {num_docs} documents")]
    OrdinalOutOfRange { ordinal: usize, num_docs: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("in-batch loss needs at least 2 queries, got {0}")]
    BatchTooSmall(usize),

    #[error("length mismatch: {hyps} hypotheses vs {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },

    #[error("metric needs at least one hypothesis/reference pair")]
    EmptyCorpus,

    #[error("bad parameter file {path}: {reason}")]
    BadParamFile { path: PathBuf, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pipeline stage {stage}: {reason}")]
    MissingArtifact { stage: &'static str, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
