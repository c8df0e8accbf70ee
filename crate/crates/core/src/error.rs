use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("communication graph is disconnected")]
    DisconnectedGraph,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("sample index {index} out of range for {n} samples")]
    SampleIndex { index: usize, n: usize },

    #[error("sample batch is empty")]
    EmptyBatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("cannot partition {n} samples across {m} agents")]
    InvalidPartition { n: usize, m: usize },

    #[error("iteration budget of {0} exhausted")]
    BudgetExceeded(u64),

    #[error("trajectory holds no recorded iterates")]
    EmptyTrajectory,

    #[error("non-finite value encountered at iteration {iter}")]
    NonFinite { iter: u64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
