use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or unreadable configuration, model file or manifest.
    #[error("configuration error: {0}")]
    Config(String),
    /// A solver or estimator failed while the campaign was running.
    #[error("numerical failure: {0}")]
    Numerical(#[from] etuq::Error),
    #[error("cannot write artifacts: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) | CliError::Output(_) => EXIT_NUMERICAL,
        }
    }
}
