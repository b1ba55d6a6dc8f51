//! Crate-wide error type.

use crate::index::BallId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("feature vector has no coordinates")]
    EmptyFeatureVector,

    #[error("coordinate {index} is not finite")]
    NonFiniteCoordinate { index: usize },

    #[error("bag `{id}` has no descriptors")]
    EmptyBag { id: String },

    #[error("ball {0} already present in index")]
    DuplicateBall(BallId),

    #[error("ball {0} not present in index")]
    UnknownBall(BallId),

    #[error("model contains no balls")]
    EmptyModel,

    #[error("no stored label for bag `{0}`")]
    OracleMiss(String),

    #[error("invalid {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    /// Malformed input data, with file and line context.
    #[error("{path}:{line}: {reason}")]
    Data {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("dataset contains no bags")]
    EmptyDataset,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn data(path: impl Into<String>, line: usize, reason: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
