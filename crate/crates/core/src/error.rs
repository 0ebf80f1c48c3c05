use thiserror::Error;

use crate::dataflow::TaskId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: expected {expected} entries, got {actual}")]
    LengthMismatch {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("map `{map}` entry {position} is {value}, target set has {bound} elements")]
    IndexOutOfRange {
        map: String,
        position: usize,
        value: i64,
        bound: usize,
    },

    #[error("invalid declaration: {0}")]
    InvalidDecl(String),

    #[error("loop `{name}` argument {index}: {reason}")]
    InvalidArg {
        name: String,
        index: usize,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown handle: {0}")]
    UnknownHandle(String),

    /// A kernel panicked in `task`; every token downstream of it reports the
    /// same failure.
    #[error("task {task} (`{name}`) failed: {message}")]
    TaskPanicked {
        task: TaskId,
        name: String,
        message: String,
    },
}
