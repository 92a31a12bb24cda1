use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid ring: {0}")]
    InvalidRing(String),
    #[error("inexact division: {0}")]
    InexactDivision(String),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("extend residue field: {0}")]
    ExtendResidueField(String),
    #[error("not singular at origin: {0}")]
    NotSingularAtOrigin(String),
    #[error("delta not a p-th root: {0}")]
    NotPthRoot(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("no template match: {0}")]
    NoTemplateMatch(String),
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("flag violated: {0}")]
    FlagViolated(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
