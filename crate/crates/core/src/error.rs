use thiserror::Error;

/// Errors raised by the spline, assembly and fitting routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("{what} = {value} lies outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("knots must be strictly increasing (knot {index} = {value} <= previous)")]
    KnotsNotIncreasing { index: usize, value: f64 },
    #[error("a partition needs at least two knots, got {0}")]
    TooFewKnots(usize),
    #[error("degree {0} is not supported (expected 3..=10)")]
    UnsupportedDegree(usize),
    #[error("coefficient vector has length {got}, expected {expected}")]
    CoefficientLength { got: usize, expected: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A QP solve did not reach optimality. For cutting-plane fits `trace`
    /// holds the iterations completed before the failure.
    #[error("quadratic program failed: {message}")]
    Solver {
        message: String,
        trace: Vec<crate::smoothers::CpIteration>,
    },
}

pub type Result<T, E = SplineError> = std::result::Result<T, E>;
