use thiserror::Error;

/// Errors raised by the solvers and the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("collar width {width} must be smaller than the half-length {half_length}")]
    CollarTooWide { width: f64, half_length: f64 },

    #[error("initial data is not compatible with the boundary condition (residuals {lower:e}, {upper:e}; tolerance {tol:e})")]
    Incompatible { lower: f64, upper: f64, tol: f64 },

    #[error("step size {dt:e} outside [{dt_min:e}, {dt_max:e}]")]
    StepOutOfRange { dt: f64, dt_min: f64, dt_max: f64 },

    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("profile is not positive at x = {0}")]
    DegenerateProfile(f64),

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("non-positive value {value:e} at t = {t}")]
    NonPositive { t: f64, value: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
