use rydsim::SimError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Simulation(#[from] SimError),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    /// 2 for bad input, 3 when the integration itself fails, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Simulation(SimError::InvalidArgument(_) | SimError::OutOfRange { .. }) => 2,
            CliError::Simulation(SimError::IntegrationFailure { .. } | SimError::UndefinedPhase { .. }) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Simulation(SimError::IntegrationFailure { .. }) => "integration",
            CliError::Simulation(SimError::UndefinedPhase { .. }) => "undefined_phase",
            CliError::Simulation(_) => "invalid_argument",
            CliError::Io(_) => "io",
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport { error: ErrorBody { kind: self.kind(), message: self.to_string(), exit_code: self.exit_code() } }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: ErrorBody,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}
