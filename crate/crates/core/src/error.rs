use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: start time {found} is earlier than the previous word's {previous}")]
    NonMonotonicTime {
        line: usize,
        previous: f64,
        found: f64,
    },

    #[error("line {line}: time {value} is negative or not finite")]
    NegativeTime { line: usize, value: f64 },

    #[error("line {line}: word ends ({end}) before it starts ({start})")]
    InvalidSpan { line: usize, start: f64, end: f64 },

    #[error("event {index}: time {found} does not increase over {previous}")]
    NonIncreasingEventTime {
        index: usize,
        previous: f64,
        found: f64,
    },

    #[error("incremental log has no events")]
    EmptyLog,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("document mismatch: expected `{expected}`, found `{found}`")]
    DocMismatch { expected: String, found: String },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("no time available for {side} word {index}")]
    MissingTime { side: &'static str, index: usize },

    #[error("no latency samples")]
    EmptySamples,

    #[error("source side has zero length")]
    ZeroSource,

    #[error("both samples have zero variance and different means")]
    DegenerateVariance,

    #[error("source side has {source_lines} lines but target side has {target_lines}")]
    LineCountMismatch {
        source_lines: usize,
        target_lines: usize,
    },
    #[error("hypothesis has {hypotheses} segments but reference has {references}")]
    LengthMismatch {
        hypotheses: usize,
        references: usize,
    },

    #[error("reference is empty")]
    EmptyReference,

    #[error("no annotation records")]
    EmptyRecords,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("no documents to process")]
    NoDocuments,

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

    pub(crate) fn malformed(line: usize, reason: impl Into<String>) -> Self {
        Error::MalformedLine {
            line,
            reason: reason.into(),
        }
    }
}
