use thiserror::Error;

/// Errors raised across the solver pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("decay estimate inapplicable: radicand N²/P² + 2λb − ω² = {radicand} is not positive")]
    DecayOutOfRange { radicand: f64 },

    #[error("integrand is not finite at node {index} (rho = {rho}): {value}")]
    NonFiniteIntegrand { index: usize, rho: f64, value: f64 },

    #[error(
        "Gram-Schmidt pivot {pivot:e} below threshold at mode {mode}; quadrature grid too coarse for the basis size"
    )]
    GramSchmidtBreakdown { mode: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("rho = {rho} outside the admissible range [{lo}, {hi}]")]
    OutOfDomain { rho: f64, lo: f64, hi: f64 },

    #[error("frequency target {target} outside the bracket ({lo}, {hi})")]
    TargetOutOfRange { target: f64, lo: f64, hi: f64 },

    #[error("omega² not monotone in Q0 between Q0 = {q0_a} (ω² = {w_a}) and Q0 = {q0_b} (ω² = {w_b})")]
    NonMonotone { q0_a: f64, w_a: f64, q0_b: f64, w_b: f64 },

    #[error("solve did not converge: {0}")]
    NotConverged(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
