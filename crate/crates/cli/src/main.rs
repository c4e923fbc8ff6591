//! `rocksr` command-line tool.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 numerical failure, 5 file format.

mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = rocksr::exec::init_from_env();
    match &cli.command {
        Command::Prepare(a) => commands::prepare(a, threads),
        Command::Train(a) => commands::train(a, threads),
        Command::Validate(a) => commands::validate(a, threads),
        Command::Sr(a) => commands::sr(a, threads),
        Command::Metrics(a) => commands::metrics(a, threads),
        Command::Diffmap(a) => commands::diffmap(a, threads),
        Command::Hist(a) => commands::hist(a, threads),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
