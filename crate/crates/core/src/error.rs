use std::io;

use thiserror::Error;

use crate::model_format::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A CSV input did not follow its grammar.
    #[error("line {line}: {detail}")]
    Csv { line: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("training subset has {got} records but k = {need}")]
    InsufficientTraining { got: usize, need: usize },

    #[error("non-finite feature value in record {index} (timestamp_ms {timestamp_ms})")]
    NonFiniteFeature { index: usize, timestamp_ms: i64 },

    /// All training distances are zero, so every off-centroid point would be flagged.
    #[error("degenerate threshold: every training distance is zero")]
    DegenerateThreshold,

    #[error("model does not match the feature schema: {0}")]
    SchemaMismatch(String),

    #[error("timestamp sequences differ: {0}")]
    TimestampMismatch(String),

    #[error("invalid anomaly spec: {0}")]
    InvalidAnomaly(String),

    #[error("model rejected: {0}")]
    Model(ParseError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

// written by hand so the parse error is displayed once, not again as a source
impl From<ParseError> for Error {
    fn from(e: ParseError) -> Self {
        Error::Model(e)
    }
}
