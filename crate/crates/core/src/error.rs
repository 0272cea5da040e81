use std::fmt;

use thiserror::Error;

/// A single broken rule on a single subject record.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordViolation {
    /// Position of the record in the input list (0-based).
    pub index: usize,
    pub id: String,
    pub rule: String,
}

impl fmt::Display for RecordViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record {} (id {:?}): {}", self.index, self.id, self.rule)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time must be positive where a hazard is evaluated, got {0}")]
    NonPositiveTime(f64),

    #[error("dataset validation failed with {} violation(s); first: {}", .0.len(), .0[0])]
    Validation(Vec<RecordViolation>),

    #[error("cannot center ages of an empty record list without an explicit center")]
    EmptyCenter,

    #[error("model family mismatch: {0}")]
    FamilyMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("target diverged: {0}")]
    DivergentTarget(String),

    #[error("quadrature on [{lower}, {upper}] did not converge: refinement changed the value by {change:e}, tolerance {tolerance:e}")]
    Quadrature {
        lower: f64,
        upper: f64,
        change: f64,
        tolerance: f64,
    },

    #[error("insufficient draws: {0}")]
    InsufficientDraws(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DivergentTarget(_) | Error::Quadrature { .. } | Error::InsufficientDraws(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Wraps an I/O error with the path it concerns.
pub(crate) fn io_at(path: &std::path::Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}
