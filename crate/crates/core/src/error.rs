use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} µs is outside the schedule window [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error(
        "integration failure: norm drift {drift:.3e} exceeds {limit:.0e} at t = {t} µs; \
         reduce the step (raise integrator.step_divisor)"
    )]
    IntegrationFailure { drift: f64, limit: f64, t: f64 },

    #[error(
        "ground amplitude magnitude {magnitude:.3e} is below the phase threshold at t = {t} µs; \
         report the phase at the final time only"
    )]
    UndefinedPhase { t: f64, magnitude: f64 },
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SimError::InvalidArgument(msg.into()))
}
