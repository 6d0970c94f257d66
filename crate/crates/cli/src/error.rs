use thiserror::Error;

/// Command failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum AppError {
    /// Bad scenario, parameter or command-line input.
    #[error("{0}")]
    Validation(String),
    /// The integrator gave up; partial output may have been written.
    #[error("{0}")]
    Integration(String),
    /// A validation run completed but did not meet its criterion.
    #[error("{0}")]
    Acceptance(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation(_) => 2,
            AppError::Integration(_) => 3,
            AppError::Acceptance(_) => 4,
            AppError::Io(_) => 1,
        }
    }
}
