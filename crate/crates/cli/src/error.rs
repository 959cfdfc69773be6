use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Simulation(droopsim::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Simulation(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Input(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<droopsim::Error> for CliError {
    fn from(e: droopsim::Error) -> Self {
        use droopsim::Error as E;
        match e {
            E::Parse(_) | E::Config(_) | E::InvalidParameter { .. } | E::InfeasibleTarget(_) => {
                CliError::Input(e.to_string())
            }
            E::SimulationAbort { .. } | E::Divergence { .. } | E::DegenerateNetwork => CliError::Simulation(e),
        }
    }
}
