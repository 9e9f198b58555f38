use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("latitude out of range: {0}")]
    LatitudeOutOfRange(f64),
    #[error("longitude out of range: {0}")]
    LongitudeOutOfRange(f64),
    #[error("zero time delta")]
    ZeroTimeDelta,
    #[error("no training points")]
    NoTrainingPoints,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty test window")]
    EmptyWindow,
    #[error("sequence too short: need at least {needed} symbols, got {got}")]
    SequenceTooShort { needed: usize, got: usize },
    #[error("symbol out of vocabulary: {symbol} (vocabulary size {vocab_size})")]
    SymbolOutOfVocabulary { symbol: usize, vocab_size: usize },
    #[error("window has zero probability under the model")]
    ZeroProbability,
    #[error("insufficient scores: {0}")]
    InsufficientScores(&'static str),
    #[error("need >= 2 users for impostor scores")]
    NotEnoughUsers,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("model format version mismatch: expected v{expected}, found {found}")]
    VersionMismatch { expected: u32, found: String },
    #[error("model kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}
