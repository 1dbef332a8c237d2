use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("series out of validity: Ns = {ns} (the perturbation series needs Ns > 3)")]
    SeriesOutOfValidity { ns: f64 },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("oracle diagonalization not converged: level {level} moved by {shift:.3e} when the basis grew from {basis_size} to {next_size}")]
    OracleNotConverged {
        level: usize,
        shift: f64,
        basis_size: usize,
        next_size: usize,
    },

    #[error("oracle could not identify a well-localized state for level {level}")]
    OracleLevelMissing { level: usize },

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("norm drift {drift:.3e} exceeds {limit:.3e} at t = {t}")]
    NormDrift { t: f64, drift: f64, limit: f64 },

    #[error("insufficient oscillations: {0}")]
    InsufficientOscillations(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("optimizer did not converge within {iterations} sweeps (last change {last_change:.3e})")]
    NotConverged { iterations: usize, last_change: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
