use thiserror::Error;

/// Unified error type. The variants map onto the CLI exit codes:
/// `Config` -> 2, `Constraint` -> 3, `Numerical` -> 4.
#[derive(Debug, Error)]
pub enum GateError {
    #[error("config error: {0}")]
    Config(String),
    #[error("physics constraint violated: {0}")]
    Constraint(String),
    #[error("numerical guard tripped: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl GateError {
    pub fn exit_code(&self) -> i32 {
        match self {
            GateError::Config(_) => 2,
            GateError::Constraint(_) => 3,
            GateError::Numerical(_) => 4,
            GateError::Io(_) => 1,
        }
    }
}
