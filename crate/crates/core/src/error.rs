use thiserror::Error;

use crate::blrbf::IterRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error in {context} at iteration {iteration}")]
    Numerical { context: String, iteration: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("solver diverged at iteration {}{}", .0.iteration, .0.node.map(|n| format!(" on node {n}")).unwrap_or_default())]
    Diverged(Box<Divergence>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Diagnostic payload carried by [`Error::Diverged`].
#[derive(Debug, Clone)]
pub struct Divergence {
    pub iteration: usize,
    pub node: Option<usize>,
    pub logical_time: Option<u64>,
    pub history: Vec<IterRecord>,
}

impl Error {
    pub(crate) fn dim(what: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension {
            what,
            expected,
            got,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
