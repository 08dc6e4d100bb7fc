//! Implementation of the `kryloscope` command-line tool.
//!
//! Every run writes its outputs plus a `manifest.json` (configuration echo,
//! tool version, numerical flags raised, file list) into the output
//! directory, atomically. Deterministic subcommands produce byte-identical
//! files for identical configurations; stochastic ones are deterministic
//! given the seed.

pub mod args;
pub mod commands;
pub mod output;
pub mod spec;

use serde::Serialize;

/// Exit status contract: 0 success, 1 numerical-flag failure, 2 config or
/// I/O error.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration, arguments, or I/O problems (exit 2).
    Config(String),
    /// The computation completed but raised numerical validity flags
    /// (exit 1 unless `--allow-flagged`).
    Numerical(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 1,
        }
    }

    /// Machine-readable error report for stderr.
    pub fn report(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            kind: &'a str,
            message: String,
            flags: Vec<String>,
        }
        let report = match self {
            CliError::Config(msg) => {
                Report { kind: "config", message: msg.clone(), flags: vec![] }
            }
            CliError::Numerical(flags) => Report {
                kind: "numerical",
                message: "run raised numerical validity flags".into(),
                flags: flags.clone(),
            },
        };
        serde_json::to_string(&report).unwrap()
    }
}

impl From<kryloscope::Error> for CliError {
    fn from(e: kryloscope::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
