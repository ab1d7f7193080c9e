use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        })
    }
}

impl From<mu2_core::Error> for CliError {
    fn from(e: mu2_core::Error) -> Self {
        use mu2_core::Error as E;
        match e {
            E::InvalidDimension(_)
            | E::InvalidGeometry(_)
            | E::InvalidMesh(_)
            | E::FieldShape { .. }
            | E::Precondition(_)
            | E::NegativeFactor(_)
            | E::ZeroField
            | E::DimensionMismatch(..) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("I/O: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Numerical(format!("CSV: {e}"))
    }
}
