use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] relaynet::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("cannot parse config: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            CliError::Config(_) | CliError::Toml(_) | CliError::Core(relaynet::Error::Config(_))
        )
    }

    /// Process exit status: 2 for an infeasible power budget, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(relaynet::Error::Infeasible(_)) => 2,
            _ => 1,
        }
    }
}
