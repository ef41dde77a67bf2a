mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file or parameters.
    Config(String),
    Io(String),
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 64,
            CliError::Io(_) => 74,
            CliError::Failed(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Failed(m) => m,
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Presets(a) => commands::presets(&a.resolve()?),
        Command::Cone(a) => commands::cone(&a.resolve()?),
        Command::Integrate(a) => commands::integrate_cmd(&a.resolve()?),
        Command::SearchSymmetric(a) => commands::search_symmetric(&a.resolve()?),
        Command::MatchSphere(a) => commands::match_sphere(&a.resolve()?),
        Command::CountCritical(a) => commands::count_critical(&a.resolve()?),
        Command::VerifyAsymptotics(a) => commands::verify_asymptotics_cmd(&a.resolve()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
