use std::path::Path;

use thiserror::Error;

/// Errors carry the process exit code: 2 for bad input, 3 for backend or
/// runtime failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Backend(_) => 3,
        }
    }

    pub fn input(msg: impl std::fmt::Display) -> Self {
        CliError::Input(msg.to_string())
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }
}

impl From<frameguard::BackendError> for CliError {
    fn from(e: frameguard::BackendError) -> Self {
        match e {
            // a latent of the wrong size is the caller's mistake
            frameguard::BackendError::Latent(l) => CliError::Input(l.to_string()),
            other => CliError::Backend(other.to_string()),
        }
    }
}

impl From<frameguard::correction::CorrectionError> for CliError {
    fn from(e: frameguard::correction::CorrectionError) -> Self {
        use frameguard::correction::CorrectionError as E;
        match e {
            E::Backend(b) => b.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<frameguard::sweeps::SweepError> for CliError {
    fn from(e: frameguard::sweeps::SweepError) -> Self {
        use frameguard::sweeps::SweepError as E;
        match e {
            E::Backend(b) => b.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
