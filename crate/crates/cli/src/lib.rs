//! Experiment sweeps, CSV export and the validation suite behind the
//! `fso-noma` command.

pub mod config;
pub mod csv;
pub mod sweep;
pub mod validate;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}{}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Config {
        path: String,
        line: Option<usize>,
        message: String,
    },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// Maps a library error raised at `context`.
    pub fn from_core(e: fso_noma::Error, context: &str) -> Self {
        if e.is_numeric() {
            CliError::Numeric(format!("{context}: {e}"))
        } else {
            CliError::Config {
                path: context.to_string(),
                line: None,
                message: e.to_string(),
            }
        }
    }

    /// 2 for configuration errors, 3 for numeric and output failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}
