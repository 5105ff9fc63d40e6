//! Error type shared by every module of the crate.

use thiserror::Error;

/// Everything that can go wrong while building, evaluating or analysing a
/// geometric phase integral.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("non-finite value encountered while evaluating {0}")]
    NonFinite(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("arity mismatch: field {index} has arity {got}, expected {expected}")]
    ArityMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },

    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("|F'(x0)| = {value:e} is below the threshold {threshold:e}")]
    FlatDerivative { value: f64, threshold: f64 },

    #[error("total arity {arity} exceeds the configured cap {cap}")]
    DimensionOverflow { arity: usize, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iteration budget exceeded on {failed} of {seeds} seeds")]
    BudgetExceeded { failed: usize, seeds: usize },

    #[error("point is not critical: |grad L| = {grad_norm:e} > {tolerance:e}")]
    NotCritical { grad_norm: f64, tolerance: f64 },

    #[error("degenerate Hessian at term {index} (det = {det:e})")]
    DegenerateHessian { index: usize, det: f64 },

    #[error("quadrature needs {required} nodes, budget is {budget}")]
    ResolutionExceeded { required: usize, budget: usize },

    #[error("evaluator failed at h = {h}: {message}")]
    EvaluatorFailure { h: f64, message: String },

    #[error("no critical family: {0}")]
    NoFamily(String),

    #[error("determinant ratio did not stabilise within {budget} family members")]
    SlowOnset { budget: usize },

    #[error("outside the convergent expansion regime: h*beta*max(L3)*max(y^2) = {product} > 1")]
    RegimeViolation { product: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
