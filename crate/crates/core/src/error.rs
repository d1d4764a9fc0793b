use std::fmt;

use thiserror::Error;

/// One structural problem found while validating a model.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonGenerator { state: usize, row: usize, row_sum: f64 },
    ImproperKernel { state: usize, row_sum: f64 },
    BadDistribution { context: String, reason: String },
    IndexError { context: String, reason: String },
    Numeric { reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonGenerator { state, row, row_sum } => write!(
                f,
                "NonGenerator: state {state}, row {row} of D sums to {row_sum:e}"
            ),
            Violation::ImproperKernel { state, row_sum } => write!(
                f,
                "ImproperKernel: kernel row of state {state} sums to {row_sum}"
            ),
            Violation::BadDistribution { context, reason } => {
                write!(f, "BadDistribution: {context}: {reason}")
            }
            Violation::IndexError { context, reason } => write!(f, "IndexError: {context}: {reason}"),
            Violation::Numeric { reason } => write!(f, "BadNumeric: {reason}"),
        }
    }
}

/// The complete list of violations reported by model validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Violations(pub Vec<Violation>);

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model:\n{0}")]
    Invalid(Violations),

    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("schema error: field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("argument outside the admissible domain: {0}")]
    Domain(String),

    #[error("generator is reducible: {0}")]
    Reducible(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("not a probability law: {0}")]
    NonProbability(String),

    #[error("tail truncation not achieved: {0}")]
    Truncation(String),

    #[error("pgf not normalized: pgf(1) = {0}")]
    NotNormalized(f64),

    #[error("model is not of the degenerate batch-Poisson form: {0}")]
    NotDegenerate(String),

    #[error("sojourn laws are not exponential: {0}")]
    NotExponential(String),

    #[error("event cap of {0} exceeded")]
    ExplosionGuard(u64),

    #[error("no counterpart for label {0}")]
    LabelMismatch(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_) | Error::Syntax { .. } | Error::Schema { .. } | Error::Reducible(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
