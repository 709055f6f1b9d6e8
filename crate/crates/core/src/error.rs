//! Error type shared by all modules.

use thiserror::Error;

/// Failure classes map one-to-one onto the CLI exit codes
/// (I/O = 2, format = 3, input/state contract = 4, generation/internal = 5).
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed on-disk or wire data (bad RLE counts, bad magic, bad JSON shape).
    #[error("format error: {0}")]
    Format(String),

    /// A caller-supplied value violates an operation's contract.
    #[error("input error: {0}")]
    Input(String),

    /// An operation was applied to a value in the wrong state.
    #[error("state error: {0}")]
    State(String),

    /// A generator could not satisfy its constraints.
    #[error("generation error: {0}")]
    Generation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }

    pub fn generation(msg: impl Into<String>) -> Self {
        Error::Generation(msg.into())
    }
}
