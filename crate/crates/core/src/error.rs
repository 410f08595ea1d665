use thiserror::Error;

use crate::treebank::Address;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("annotation error in tree {tree}: {message}")]
    Annotation { tree: usize, message: String },

    #[error("tree {tree} has root {found}, expected start symbol {expected}")]
    StartMismatch {
        tree: usize,
        expected: String,
        found: String,
    },

    #[error("unknown node address {0}")]
    UnknownAddress(Address),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("provenance error: {0}")]
    Provenance(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Error {
        Error::Format {
            line,
            message: message.into(),
        }
    }
}
