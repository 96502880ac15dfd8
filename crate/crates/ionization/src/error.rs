use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{func}: argument {arg} outside the domain")]
    Domain { func: &'static str, arg: f64 },

    #[error("{func}: complex argument {arg} outside the domain")]
    ComplexDomain { func: &'static str, arg: Complex64 },

    #[error("quadrature did not converge: error estimate {estimate:e} after {evals} evaluations")]
    Quadrature { estimate: f64, evals: usize },

    #[error("nu table would reach t = {t_max}, beyond the overflow guard t <= {limit}")]
    TableOverflow { t_max: f64, limit: f64 },

    #[error("table covers {available} samples but {needed} are required")]
    TableCoverage { needed: usize, available: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("step {step} exceeds the limit {limit}")]
    StepTooLarge { step: f64, limit: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {context} at index {index}")]
    NonFinite { context: &'static str, index: usize },

    #[error("Neumann majorant {bound:e} too large for a reliable Picard iteration")]
    ContractionViolated { bound: f64 },

    #[error("{what} did not converge (last change {residual:e})")]
    NonConvergence { what: &'static str, residual: f64 },

    #[error("singular point: {0}")]
    SingularPoint(Complex64),

    #[error("resonant frequency: {n} * omega equals exp(2(log 2 - gamma)) (margin {margin:e})")]
    Resonance { n: u64, margin: f64 },

    #[error("decay fit window {t_min}..{t_max} is too short")]
    InsufficientWindow { t_min: f64, t_max: f64 },

    #[error("decay fit found no envelope samples")]
    EmptyEnvelope,

    #[error("accuracy target missed: {0}")]
    Accuracy(String),

    #[error("no root found near {seed} ({reason})")]
    NoRoot { seed: Complex64, reason: String },

    #[error("contour passes through a zero near {0}")]
    ContourThroughZero(Complex64),

    #[error("winding integral {0} is not close to an integer")]
    NonIntegerWinding(f64),

    #[error("residue contour is contaminated (doubling changed R0 by {0:e})")]
    ContourContamination(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
