use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("I/O error: {0}")]
    Stream(#[from] std::io::Error),

    /// Binary embedding or matrix file could not be parsed.
    #[error("parse error at byte offset {offset}: {message}")]
    Binary { offset: u64, message: String },

    /// Line-oriented text file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Text { line: usize, message: String },

    #[error("embedding table has an empty vocabulary")]
    EmptyVocabulary,

    #[error("invalid embedding table: {0}")]
    InvalidTable(String),

    #[error("none of the requested tokens are in the vocabulary")]
    NoKnownTokens,

    /// No token of the input survived vocabulary filtering.
    #[error("document has no in-vocabulary tokens: {tokens:?}")]
    EmptyDocument { tokens: Vec<String> },

    #[error("invalid document: {0}")]
    InvalidDocument(String),

    #[error("documents were built against a different embedding table ({expected:#018x} vs {found:#018x})")]
    TableMismatch { expected: u64, found: u64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("marginal is not a probability vector: {0}")]
    InvalidMarginal(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("training data contains a single class")]
    SingleClass,

    /// Correlation is undefined for constant input.
    #[error("correlation undefined: {0} sequence is constant")]
    ConstantSequence(&'static str),

    #[error("no usable records: {0}")]
    NoData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
