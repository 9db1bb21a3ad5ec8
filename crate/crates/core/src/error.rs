use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the allocation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid population model: {0}")]
    InvalidPopulation(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("frontier is empty")]
    EmptyFrontier,

    #[error("frontier size must be at least 1")]
    ZeroFrontierSize,

    #[error("enumeration of {count} allocations exceeds the limit of {limit}")]
    EnumerationTooLarge { count: u128, limit: u128 },

    #[error("remaining budget {requested} exceeds the table's budget cap {cap}")]
    BudgetOutOfRange { requested: u32, cap: u32 },

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible action: {0}")]
    InfeasibleAction(String),

    #[error("{path}:{line}: {message}", path = path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("no records to partition")]
    EmptyRecords,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
