use std::process::ExitCode;

use thiserror::Error;

/// CLI failure modes, mapped onto the stable exit codes:
/// 1 usage/parse, 2 convergence, 3 I/O.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Convergence(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn parse(path: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Parse { path: path.into(), message: msg.into() }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } => ExitCode::from(1),
            CliError::Convergence(_) => ExitCode::from(2),
            CliError::Io { .. } => ExitCode::from(3),
        }
    }
}

/// Solver errors at the command boundary: input-shaped problems count as
/// parse/usage failures, iteration failures as convergence failures.
pub fn from_solver(err: grouplasso::Error) -> CliError {
    match err {
        grouplasso::Error::InvalidInput(m) | grouplasso::Error::DimensionMismatch(m) => {
            CliError::Usage(m)
        }
        grouplasso::Error::Convergence { message, iterations, .. } => {
            CliError::Convergence(format!("{message} (after {iterations} iterations)"))
        }
        grouplasso::Error::Internal(m) => CliError::Convergence(m),
    }
}
