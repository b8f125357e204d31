use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A stress row is not a probability distribution.
    #[error("stress_matrix[{row}] ({component}) sums to {sum}, expected 1 within {tolerance}")]
    RowSum {
        row: usize,
        component: String,
        sum: f64,
        tolerance: f64,
    },

    #[error("shape mismatch at {field}: {detail}")]
    Shape { field: String, detail: String },

    #[error("{field} = {value} is out of range: expected {expected}")]
    Range {
        field: String,
        value: f64,
        expected: &'static str,
    },

    #[error("{field}: {detail}")]
    InvalidName { field: String, detail: String },

    #[error("division by zero: {0}")]
    DivisionDomain(&'static str),

    #[error("{0}")]
    Domain(String),

    /// The p-weighted failure probability of a component exceeds one.
    #[error("failure probability of component {component} is {value}, which exceeds 1")]
    ProbabilityOverflow { component: usize, value: f64 },

    #[error("objective does not depend on the multipliers: every stress probability is zero")]
    DegenerateScenario,

    #[error("parse error at {path}{location}: {message}")]
    Parse {
        path: String,
        location: String,
        message: String,
    },

    #[error("invalid option {field}: {detail}")]
    InvalidOptions { field: &'static str, detail: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn range(field: impl Into<String>, value: f64, expected: &'static str) -> Self {
        Error::Range {
            field: field.into(),
            value,
            expected,
        }
    }

    pub(crate) fn shape(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Shape {
            field: field.into(),
            detail: detail.into(),
        }
    }
}
