use thiserror::Error;

/// Errors raised by problem validation, the solvers and the simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("problem must have at least one component")]
    EmptyProblem,

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("covariance matrices do not commute (normalized residual {residual:e})")]
    NotCommuting { residual: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("bracket [{lo}, {hi}] does not straddle the target {target}")]
    BracketDoesNotStraddle { lo: f64, hi: f64, target: f64 },

    #[error("rate must be a finite nonnegative number, got {0}")]
    NegativeRate(f64),

    #[error("dimension budget must be a finite nonnegative number, got {0}")]
    NegativeDimension(f64),

    #[error("channel power must be a finite nonnegative number, got {0}")]
    NegativePower(f64),

    #[error("operation requires at least two components, problem has {0}")]
    RequiresAtLeastTwoComponents(usize),

    #[error("at least {min} samples are required, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("invalid correlation coefficient {0}, must lie in [-1, 1]")]
    InvalidCorrelation(f64),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("scheme requires at least two components, problem has {0}")]
    SchemeRequiresL2(usize),

    #[error("curve is not monotone at control {control}: {prev} -> {next}")]
    CurveNotMonotone { control: f64, prev: f64, next: f64 },

    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
