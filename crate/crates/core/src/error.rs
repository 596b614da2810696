use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::jet::JetError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("point {point:?} is outside the chart domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("|grad f|^2 = {s} violates the deformation bound (need eps^2 s < 1) at {point:?}")]
    Validity { point: Vec<f64>, s: f64 },
    #[error("grad f vanishes at {point:?}; adapted frame undefined")]
    ZeroVector { point: Vec<f64> },
    #[error("point {point:?} is closer than {margin} to the domain boundary")]
    InsufficientMargin { point: Vec<f64>, margin: f64 },
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("parameter constraint violated: {0}")]
    Parameter(String),
    #[error("internal consistency check `{check}` failed (residual {residual:e})")]
    SelfCheck { check: &'static str, residual: f64 },
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("invalid input: {0}")]
    Input(String),
}

impl Error {
    /// True for violations of the standing hypothesis `|grad f| < 1`.
    pub fn is_validity(&self) -> bool {
        matches!(self, Error::Validity { .. })
    }
}
