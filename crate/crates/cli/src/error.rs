use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The run finished but a result fell outside its band.
    #[error("outside acceptance band: {}", .0.join("; "))]
    Band(Vec<String>),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
            CliError::Band(_) => 3,
        }
    }
}

impl From<fastvol::Error> for CliError {
    fn from(e: fastvol::Error) -> Self {
        use fastvol::Error as E;
        match e {
            E::Blowup { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(vec![e.to_string()]),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
