use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("document has no tokens")]
    EmptyDocument,

    #[error("corpus contains a single class (label {0}); both labels are required")]
    SingleClass(u8),

    #[error("{path}: row {row}: {message}")]
    CorpusRow {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("word `{0}` does not occur in the document")]
    WordNotInDocument(String),

    #[error("word `{0}` is not in the vectorizer vocabulary")]
    UnknownWord(String),

    #[error("requested top {requested} words but the document has only {available}")]
    TopNTooLarge { requested: usize, available: usize },

    #[error("{what} is {actual}, above the enumeration limit of {limit}")]
    TooLarge {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("weighted least-squares system is singular; use a ridge penalty > 0")]
    SingularSystem,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("anchor position {position} is out of range for a document of {len} tokens")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("no document in the corpus is predicted positive")]
    NoPositivePredictions,

    #[error("empty input")]
    EmptyInput,

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

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
