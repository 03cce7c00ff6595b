use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("line {line_id}: unknown line code `{code}`")]
    UnknownLineCode { line_id: String, code: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("initial budgets violate link {link}: R_l b = {load} > c_l = {capacity}")]
    InfeasibleStart { link: usize, load: f64, capacity: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
