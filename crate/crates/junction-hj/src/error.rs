use junction_hj_core::Error as CoreError;

/// Errors surfaced by the command-line tool.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Bad command-line usage.
    #[error("{0}")]
    Usage(String),
    /// Scenario text could not be parsed.
    #[error("parse error in {0}")]
    Parse(String),
    /// Scenario content is invalid.
    #[error("invalid scenario: {0}")]
    Config(String),
    /// Filesystem failure.
    #[error("io error: {0}")]
    Io(String),
    /// Solver error.
    #[error(transparent)]
    Core(#[from] CoreError),
    /// A checked invariant failed.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Result alias for the tool.
pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    /// Process exit code: 1 usage/config, 2 CFL violation, 3 invariant
    /// violation.
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Core(CoreError::CflViolation { .. }) => 2,
            AppError::Core(CoreError::LevelFailed { reason, .. }) if reason.starts_with("CFL") => 2,
            AppError::Core(CoreError::EstimateViolation { .. }) | AppError::Invariant(_) => 3,
            AppError::Core(CoreError::LevelFailed { reason, .. }) if reason.starts_with("estimate") => 3,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e.to_string())
    }
}
