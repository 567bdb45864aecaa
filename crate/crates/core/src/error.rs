use std::path::PathBuf;

use thiserror::Error;

use crate::dp::PrivacyLedger;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A leaf is too small for the split mechanism (fewer than 3 rows).
    #[error("degenerate leaf: {rows} rows, at least {min} required")]
    DegenerateLeaf { rows: usize, min: usize },

    #[error("tree has an unlabeled leaf (node {0})")]
    UnlabeledTree(usize),

    #[error("privacy budget exceeded: spent {spent} of {budget}")]
    BudgetExceeded {
        spent: f64,
        budget: f64,
        ledger: Box<PrivacyLedger>,
    },

    #[error("{path}: line {line}: {message}")]
    Load {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("splitting class spec: {0}")]
    Spec(String),

    #[error("config: {0}")]
    Config(String),

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("iteration cap of {0} exceeded")]
    CapExceeded(u64),

    #[error("result does not fit in a 64-bit integer: {0}")]
    Overflow(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
