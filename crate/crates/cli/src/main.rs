//! `esdtrace`: ingest instrumented-driver logs, build execution graphs,
//! compare baseline and ESD-exposed runs, and train or evaluate the
//! weighted state classifier.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod commands;
mod io;

use std::process::ExitCode;

use clap::Parser;

use crate::commands::Cli;

/// Bad flags or flag combinations, reported with exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if err.downcast_ref::<UsageError>().is_some() {
                eprintln!("usage error: {err}");
                ExitCode::from(1)
            } else {
                eprintln!("error: {err:#}");
                ExitCode::from(2)
            }
        }
    }
}
