use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("step size underflow at t = {time:e} (h = {step:e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("non-finite state encountered at t = {0:e}")]
    NonFinite(f64),

    #[error("leakage {leakage:e} exceeds threshold {threshold:e}")]
    Leakage { leakage: f64, threshold: f64 },

    #[error("force methods disagree at R = {r}: finite difference {fd:e}, eigenstate {hf:e}")]
    ForceMismatch { r: f64, fd: f64, hf: f64 },

    #[error("all {0} objective evaluations failed")]
    AllEvaluationsFailed(usize),

    #[error("optimization problem: {0}")]
    Problem(String),
}

pub type Result<T> = std::result::Result<T, Error>;
