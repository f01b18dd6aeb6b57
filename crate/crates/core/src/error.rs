use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group order {0}: must be between 2 and 256")]
    InvalidGroupOrder(usize),

    #[error("group mismatch: expected order {expected}, found {found}")]
    GroupMismatch { expected: usize, found: usize },

    #[error("invalid message: {0}")]
    InvalidMessage(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("length mismatch in {context}: expected {expected}, found {found}")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("objective is not finite at alpha = {0}")]
    NonFiniteObjective(f64),

    #[error("infeasible rate: k*L/(n*(L+m)) = {rate} exceeds the allowed {max}")]
    InfeasibleRate { rate: f64, max: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
