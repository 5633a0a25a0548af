use thiserror::Error;

use crate::expr::{EvalError, ParseError};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("hamiltonian depends on t; use the extended field instead")]
    TimeDependentHamiltonian,
    #[error("fields must not depend on t here")]
    TimeDependentField,
    #[error("vector field vanishes at sample {index} (max component {norm:e})")]
    DegeneratePoint { index: usize, norm: f64 },
    #[error("denominator {value:e} is too close to zero")]
    DivisionNearZero { value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("inadmissible scaling case: {constraint}")]
    InadmissibleCase { constraint: String },
    #[error("self-test of `{label}` failed: residual {residual:e} exceeds {threshold:e}")]
    SelfTestFailed { label: String, residual: f64, threshold: f64 },
    #[error("sample point is outside the admissible domain: {0}")]
    Inadmissible(String),
    #[error("could not draw {wanted} admissible samples (got {got})")]
    SamplingExhausted { wanted: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Integration(#[from] crate::dynamics::IntegrationFailure),
    #[error("config error in {path}: {message}")]
    Config { path: String, message: String },
    #[error("check `{check}` failed to run: {source}")]
    Check { check: String, source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
