//! Command-line front end: configuration, experiment commands and output files.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<wecseek::Error> for CliError {
    fn from(e: wecseek::Error) -> Self {
        use wecseek::Error as E;
        match e {
            E::Config(_) | E::Table(_) | E::InfeasibleFit(_) | E::OutOfRange { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
