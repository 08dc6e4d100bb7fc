use clap::Parser;
use kryloscope_cli::args::Cli;
use kryloscope_cli::{commands, CliError};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(outcome) => {
            if outcome.flags.is_empty() {
                ExitCode::SUCCESS
            } else if cli.allow_flagged {
                eprintln!("flags raised (allowed): {:?}", outcome.flags);
                ExitCode::SUCCESS
            } else {
                let err = CliError::Numerical(outcome.flags);
                eprintln!("{}", err.report());
                ExitCode::from(err.exit_code())
            }
        }
        Err(err) => {
            eprintln!("{}", err.report());
            ExitCode::from(err.exit_code())
        }
    }
}
