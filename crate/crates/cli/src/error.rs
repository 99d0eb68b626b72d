use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const INFEASIBLE: i32 = 2;
    pub const SOLVER_FAILURE: i32 = 3;
    pub const USAGE: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Unreadable or invalid input file.
    #[error("{0}")]
    Input(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => exit::USAGE,
            CliError::Infeasible(_) => exit::INFEASIBLE,
            CliError::Solver(_) | CliError::Io(_) => exit::SOLVER_FAILURE,
        }
    }
}

impl From<ebl_core::Error> for CliError {
    fn from(e: ebl_core::Error) -> Self {
        CliError::Solver(e.to_string())
    }
}
