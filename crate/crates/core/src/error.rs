use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point {0} is outside the domain")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },
    #[error("{op} is not supported for the {map} map")]
    UnsupportedMap { op: &'static str, map: String },
    #[error("bit source exhausted: {needed} bits needed, {available} available")]
    InputExhausted { needed: usize, available: usize },
    #[error("no convergence after {iterations} iterations (estimate {estimate})")]
    Convergence {
        iterations: usize,
        estimate: f64,
        last: Vec<f64>,
    },
    #[error("{what}: {count} exceeds the cap {cap}; use Monte Carlo mode")]
    Resource {
        what: &'static str,
        count: u64,
        cap: u64,
    },
    #[error("floating-point iteration of the {map} map refused beyond {limit} steps (requested {steps})")]
    PrecisionLoss {
        map: String,
        steps: usize,
        limit: usize,
    },
    #[error("division by zero: {0}")]
    Division(&'static str),
    #[error("internal error: {0}")]
    Internal(String),
}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
