mod args;
mod commands;
mod manifest;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_EMPTY_PRUNING: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    /// Invalid input data, configuration or I/O failure.
    Data(String),
    /// The invocation is refused as given (e.g. it would overwrite outputs).
    Refused(String),
    /// Pruning kept no node; the thresholds must be lowered.
    EmptyPruning(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => EXIT_DATA,
            CliError::Refused(_) => EXIT_USAGE,
            CliError::EmptyPruning(_) => EXIT_EMPTY_PRUNING,
        }
    }
}

impl From<cusplit_core::Error> for CliError {
    fn from(e: cusplit_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Data(m) | CliError::Refused(m) | CliError::EmptyPruning(m) => f.write_str(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    let mut command = cli.command;
    let result = command
        .absolutize()
        .map_err(|e| CliError::Data(format!("cannot resolve paths: {e}")))
        .and_then(|()| commands::run(&command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
