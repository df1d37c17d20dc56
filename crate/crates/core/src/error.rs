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

    #[error("{path}: unsupported format version {found} (this build reads version {expected})")]
    FormatVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("{path}: not a {expected} file (found format tag {found:?})")]
    FormatTag {
        path: PathBuf,
        found: String,
        expected: &'static str,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown report id {0:?}")]
    UnknownReport(String),

    #[error("gold and predicted corpora disagree on report ids (missing from predicted: {missing_in_predicted:?}; missing from gold: {missing_in_gold:?})")]
    IdMismatch {
        missing_in_predicted: Vec<String>,
        missing_in_gold: Vec<String>,
    },

    #[error("vocabulary is empty after applying min_count = {min_count}")]
    EmptyVocabulary { min_count: u32 },

    #[error("not enough candidate pairs: need {needed} {label} pairs, corpus offers {available}")]
    InsufficientPairs {
        label: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("invalid pattern {pattern:?}: {source}")]
    Pattern {
        pattern: String,
        #[source]
        source: regex::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
