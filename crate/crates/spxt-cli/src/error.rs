//! Error type carrying the process exit code contract:
//! 0 success, 2 config error, 3 input mismatch, 4 solver failure.

use spxt_core::forward::ForwardError;
use spxt_core::geometry::GeometryError;
use spxt_core::metrics::MetricsError;
use spxt_core::phantom::PhantomError;
use spxt_core::solver::SolverError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input mismatch: {0}")]
    InputMismatch(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::InputMismatch(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<PhantomError> for CliError {
    fn from(e: PhantomError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ForwardError> for CliError {
    fn from(e: ForwardError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::DimensionMismatch { .. } | MetricsError::GeometryMismatch => {
                CliError::InputMismatch(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}
