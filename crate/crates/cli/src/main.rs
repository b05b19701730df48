use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod bench;
mod common;
mod gen;
mod report;
mod result;
mod run;
mod scos;
mod search;

/// Band-selection experiments on hyperspectral scenes.
///
/// Exit codes: 0 success, 1 I/O or runtime failure, 2 usage or config
/// error, 3 not found. BSS_THREADS caps worker threads; RUST_LOG sets the
/// log level (default warn).
#[derive(Parser, Debug)]
#[command(name = "bss", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic scene.
    Gen(gen::GenArgs),
    /// Build and query benchmark tables.
    #[command(subcommand)]
    Bench(bench::BenchCommand),
    /// Search for a band combination.
    Search(search::SearchArgs),
    /// Train and query a one-shot supernet.
    #[command(subcommand)]
    Scos(scos::ScosCommand),
    /// Write CSV reports.
    #[command(subcommand)]
    Report(report::ReportCommand),
    /// Run a whole experiment from a TOML config.
    Run(run::RunArgs),
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen::run(&a),
        Command::Bench(c) => bench::run(&c),
        Command::Search(a) => search::run(&a).map(|_| ()),
        Command::Scos(c) => scos::run(&c),
        Command::Report(c) => report::run(&c),
        Command::Run(a) => run::run(&a),
    }
}

/// The error chain joined with ": ", skipping causes the previous message
/// already quotes.
fn message(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.ends_with(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var(bss_core::parallel::THREADS_ENV) {
        if bss_core::parallel::thread_cap().is_none() {
            log::warn!("ignoring {}={v:?}; expected a positive integer", bss_core::parallel::THREADS_ENV);
        }
    }
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", message(&e));
            ExitCode::from(common::exit_code(&e))
        }
    }
}
