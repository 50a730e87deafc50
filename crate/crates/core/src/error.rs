use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("component {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown node id {0}")]
    UnknownNode(usize),

    #[error("tree is empty")]
    EmptyTree,

    #[error("action component {index} = {value} outside [{lo}, {hi}]")]
    ActionOutOfBounds {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("coupling matrix is rank deficient")]
    RankDeficient,

    #[error("invalid network layout: {0}")]
    InvalidLayout(String),

    #[error("training set is empty")]
    EmptySamples,

    #[error("trajectory does not end in a goal state")]
    NotAtGoal,

    #[error("no end nodes to evaluate")]
    NoEndNodes,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("bad value for `{key}`: {message}")]
    ConfigValue { key: String, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("schema mismatch in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("seed {seed}: {source}")]
    Seed {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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

    pub(crate) fn value(key: &str, message: impl Into<String>) -> Self {
        Error::ConfigValue {
            key: key.to_string(),
            message: message.into(),
        }
    }
}
