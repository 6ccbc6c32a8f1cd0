use thiserror::Error;

/// Failure classes of the command line tool, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("resource failure: {0}")]
    Resource(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Resource(_) => 4,
        }
    }
}

impl From<stt_core::Error> for CliError {
    fn from(e: stt_core::Error) -> Self {
        use stt_core::Error as E;
        match e {
            E::InvalidParameter(_) | E::NotHermitian { .. } | E::NonCommuting(_) | E::NotDensityMatrix(_) => {
                Self::Config(e.to_string())
            }
            E::BondLimit { .. } | E::Budget { .. } => Self::Resource(e.to_string()),
            E::Shape(_) | E::Quadrature(_) | E::Diverged { .. } | E::Untrained(_) => Self::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Resource(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Resource(e.to_string())
    }
}
