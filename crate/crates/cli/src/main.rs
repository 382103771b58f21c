#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod input;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("fit failed: {0}")]
    Fit(regadj::Error),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Output(_) => 1,
            CliError::Input(_) => 2,
            CliError::Fit(_) => 3,
        }
    }
}

impl From<regadj::Error> for CliError {
    fn from(e: regadj::Error) -> Self {
        use regadj::Error as E;
        match e {
            E::Singular { .. } | E::Separation | E::NonConvergence { .. } => CliError::Fit(e),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Input("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    let report = match &cli.command {
        Command::Estimate(a) => commands::estimate(a, cli.format)?,
        Command::Check(a) => commands::check(a, cli.format)?,
        Command::Compare(a) => commands::compare(a, cli.format)?,
        Command::Simulate(a) => commands::simulate(a, cli.seed, cli.format)?,
        Command::Table1(a) => commands::table1(a, cli.format)?,
    };
    match &cli.out {
        Some(path) => std::fs::write(path, report)?,
        None => std::io::stdout().lock().write_all(report.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
