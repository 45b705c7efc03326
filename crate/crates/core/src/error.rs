use std::path::PathBuf;

use thiserror::Error;

/// Summary of one pool entry, carried by identification failures.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSummary {
    pub origin: String,
    pub terms: Vec<String>,
    pub stable: bool,
    pub diverged: bool,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient data: {len} samples, need more than {required}")]
    InsufficientData { len: usize, required: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("history too short for term {term} at index {index}")]
    OutOfRange { term: String, index: usize },

    #[error("column {column} ({term}) is linearly dependent on earlier columns")]
    Singular { column: usize, term: String },

    #[error("simulation diverged at sample {index}")]
    Diverged { index: usize },

    #[error("no stable model found among {} candidates", .pool.len())]
    NoStableModel { pool: Vec<CandidateSummary> },

    #[error("failed to parse term '{0}'")]
    TermParse(String),

    #[error("{path}: {message}")]
    Ingest { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
