use dqm_core::DqmError;
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_VERIFICATION: u8 = 3;
pub const EXIT_INADMISSIBLE: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(clap::Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] DqmError),
    #[error("verification failed: {}", .0.join("; "))]
    Verification(Vec<String>),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Stable exit codes: 2 bad input or parameter domain, 3 failed
    /// verification or numerical breakdown, 4 inadmissible deletion set,
    /// 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Clap(e) if !e.use_stderr() => EXIT_OK,
            CliError::Clap(_) | CliError::Usage(_) => EXIT_INPUT,
            CliError::Core(e) => match e {
                DqmError::OutOfDomain { .. }
                | DqmError::UnknownFamily(_)
                | DqmError::InvalidGrid(_)
                | DqmError::InvalidPolicy(_)
                | DqmError::LevelOutOfRange { .. }
                | DqmError::PreconditionViolated(_) => EXIT_INPUT,
                DqmError::Inadmissible { .. } => EXIT_INADMISSIBLE,
                _ => EXIT_VERIFICATION,
            },
            CliError::Verification(_) => EXIT_VERIFICATION,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => EXIT_RUNTIME,
        }
    }
}
