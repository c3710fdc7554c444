use thiserror::Error;

/// Errors produced by the simulator and the analysis tooling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time went backwards: {now} ns after {prev} ns")]
    Ordering { prev: u64, now: u64 },

    #[error("invalid configuration at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown function label `{0}`")]
    UnknownFunction(String),

    #[error("misuse: {0}")]
    Misuse(String),

    #[error("timing source failure: {0}")]
    Timing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
