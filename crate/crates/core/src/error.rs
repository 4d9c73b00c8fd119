use std::path::PathBuf;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("no usable documents in {0}")]
    NoDocuments(PathBuf),
    #[error("empty vocabulary after applying min_count {0}")]
    EmptyVocabulary(usize),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("effort must be positive, got {0}")]
    NonPositiveEffort(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("at least two documents are needed, found {0}")]
    TooFewDocuments(usize),
    #[error("no training pairs could be formed from the corpus")]
    NoTrainingPairs,
    #[error("vocabulary size {requested} is below the base of {base} specials and characters")]
    VocabSizeTooSmall { requested: usize, base: usize },
    #[error("sequence of length {len} exceeds the maximum of {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("value {0} is not one of the bucket values")]
    NotABucket(f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("missing embedding model: {0}")]
    MissingEmbedding(String),
    #[error("missing provenance: {0}")]
    MissingProvenance(String),
    #[error("operation requires a softmax head")]
    NotClassifier,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}
