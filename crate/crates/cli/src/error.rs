use lcc_core::LccError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("analysis: {0}")]
    Analysis(LccError),
    #[error("simulation: {0}")]
    Simulation(LccError),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    /// Process exit code.
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Analysis(_) => 4,
            CliError::Simulation(_) => 5,
            CliError::Io(_) => 6,
        }
    }
}

pub fn analysis(e: LccError) -> CliError {
    match e {
        LccError::Output(m) => CliError::Io(m),
        other => CliError::Analysis(other),
    }
}

pub fn simulation(e: LccError) -> CliError {
    match e {
        LccError::Output(m) => CliError::Io(m),
        other => CliError::Simulation(other),
    }
}
