use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid integrator controls: {0}")]
    InvalidControls(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("t = {t} lies outside the computed span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },

    #[error("step budget of {0} accepted steps exhausted")]
    StepBudget(usize),

    #[error("trajectory undecided after horizon {horizon}: {detail}")]
    Undecided { horizon: f64, detail: String },

    #[error("bracketing failed: {0}")]
    Bracket(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("separatrix tracing failed: {0}")]
    Tracing(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}
