use thiserror::Error;

use crate::bits::BitString;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("line {line}: {message}")]
    Line { line: usize, message: String },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("conditioning on {sigma} which has measure zero")]
    ZeroMeasureCondition { sigma: BitString },

    #[error("measure is atomic: {0}")]
    AtomicMeasure(String),

    #[error("inconsistent monotone machine: ({}, {}) and ({}, {}) have comparable descriptions but incomparable outputs", .first.0, .first.1, .second.0, .second.1)]
    Inconsistent {
        first: (BitString, BitString),
        second: (BitString, BitString),
    },

    #[error("domain not prefix-free: descriptions {first} and {second} are comparable")]
    NotPrefixFree { first: BitString, second: BitString },

    #[error("encoding collision: code words {first} and {second} are comparable")]
    EncodingCollision { first: usize, second: usize },

    #[error("encoding word {e} has measure zero")]
    Incompatible { e: usize },

    #[error("invalid approximant at stage {stage} (sigma {sigma}, t = {t}): {reason}")]
    InvalidApproximant {
        stage: usize,
        sigma: BitString,
        t: usize,
        reason: String,
    },

    #[error("description length {length} is shorter than existing descriptions of length {required}")]
    LengthTooSmall { length: usize, required: usize },

    #[error("budget exhausted in {phase}: {detail}")]
    BudgetExhausted { phase: String, detail: String },

    #[error("construction invariant violated at stage {stage}: {detail}")]
    InvariantViolated { stage: usize, detail: String },

    #[error("q = {0} must satisfy 0 < q < 1")]
    QOutOfRange(String),

    #[error("c = {c} too small: sum of 2^(-i-c) exceeds 1 - q")]
    CTooSmall { c: u32 },

    #[error("index {0} is not the empty semimeasure")]
    NotEmpty(usize),

    #[error("index {0} is not registered for this rewrite")]
    NotRegistered(usize),

    #[error("weight at index {0} must be positive")]
    ZeroWeight(usize),

    #[error("mixture slots have no fixed point: {0}")]
    FixedPoint(String),

    #[error("interval bounds cannot separate: {0}")]
    Separation(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Attaches a line number to a parse error.
    pub fn at_line(self, line: usize) -> Error {
        match self {
            Error::Line { .. } => self,
            other => Error::Line {
                line,
                message: other.to_string(),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
