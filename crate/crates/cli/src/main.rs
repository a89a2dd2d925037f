mod commands;
mod output;
mod spec;

use std::io::Write;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use crate::output::Report;
use crate::spec::{usage, Cli, RunSpec, UsageError};

const THREADS_VAR: &str = "RESET_RUIN_THREADS";

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn print_checks(report: &Report) {
    for c in &report.checks {
        eprintln!(
            "check {}: observed {:e}, tolerance {:e}: {}",
            c.name,
            c.observed,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let spec = RunSpec::resolve(cli.command, cli.opts)?;
    let report = commands::execute(&spec)?;
    let text = output::render(&spec, &report)?;
    match &spec.out {
        Some(path) => output::write_atomic(path, &text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    print_checks(&report);
    Ok(report.passed())
}

/// Usage and configuration problems exit 2, everything else 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    let bad_input = err.downcast_ref::<UsageError>().is_some()
        || matches!(
            err.downcast_ref::<reset_ruin::Error>(),
            Some(reset_ruin::Error::InvalidConfig(_))
        );
    if bad_input { 2 } else { 1 }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
