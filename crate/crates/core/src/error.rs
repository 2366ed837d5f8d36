use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("basis is rank deficient (sigma_min/sigma_max = {ratio:e}, tolerance {tolerance:e})")]
    RankDeficient { ratio: f64, tolerance: f64 },
    #[error("involution check failed: {0}")]
    NotInvolution(String),
    #[error("distinguished element has norm {0} > 1")]
    UnitTooLarge(f64),
    #[error("element is not a contraction (norm {0})")]
    NotContraction(f64),
    #[error("level {0} is not supported for a level-1 oracle space")]
    UnsupportedLevel(usize),
    #[error("space has no involution")]
    MissingInvolution,
    #[error("no distinguished element supplied")]
    MissingUnit,
    #[error("element is not selfadjoint (deviation {0:e})")]
    NotSelfAdjoint(f64),
    #[error("unknown criterion `{0}`")]
    UnknownCriterion(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
