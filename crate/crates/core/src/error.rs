use thiserror::Error;

use crate::gridworld::{Action, StateId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid state {0:?}: out of bounds or a wall")]
    InvalidState(StateId),

    #[error("observed successor {next:?} of ({state:?}, {action:?}) lies outside the model's candidate envelope")]
    ModelInconsistency {
        state: StateId,
        action: Action,
        next: StateId,
    },

    #[error("search node budget of {budget} exceeded")]
    BudgetExceeded { budget: u64 },

    #[error("goal is unreachable from start")]
    Unreachable,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("map line {line}: {reason}")]
    MapParse { line: usize, reason: String },

    #[error("snapshot does not describe a valid table: {0}")]
    Snapshot(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
