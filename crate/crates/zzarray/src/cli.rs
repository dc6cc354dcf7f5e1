//! Argument parsing and exit-status mapping.
//!
//! Exit statuses: 0 success, 1 a check or acceptance bar failed, 2 bad
//! usage, configuration or input.

use std::ffi::OsString;
use std::fmt;

use clap::{Parser, Subcommand};

use crate::commands;
use crate::formats::FormatError;

#[derive(Debug, Parser)]
#[command(name = "zzarray", version, about = "Robust pulse synthesis for qubit arrays with fixed ZZ coupling")]
pub struct Cli {
    /// Worker threads for corner evaluation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a lattice and optionally a driving pattern.
    Lattice(commands::lattice::Args),
    /// Check that a driving pattern decomposes into commuting blocks.
    Validate(commands::validate::Args),
    /// Synthesize a robust pulse for one block.
    Optimize(Box<commands::optimize::Args>),
    /// Recover bare frequencies from spectroscopic peaks.
    Calibrate(commands::calibrate::Args),
    /// Schedule a circuit onto an array.
    Compile(commands::compile::Args),
    /// Compile, build a pulse library and simulate a circuit.
    Simulate(commands::simulate::Args),
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn failed(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<zzarray_core::Error> for CliError {
    fn from(e: zzarray_core::Error) -> Self {
        Self::usage(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match with_threads(cli.threads, || dispatch(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Lattice(a) => commands::lattice::run(a),
        Command::Validate(a) => commands::validate::run(a),
        Command::Optimize(a) => commands::optimize::run(*a),
        Command::Calibrate(a) => commands::calibrate::run(a),
        Command::Compile(a) => commands::compile::run(a),
        Command::Simulate(a) => commands::simulate::run(a),
    }
}

#[cfg(feature = "parallel")]
fn with_threads(threads: Option<usize>, f: impl FnOnce() -> CliResult + Send) -> CliResult {
    match threads {
        Some(0) => Err(CliError::usage("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::usage(format!("cannot start thread pool: {e}")))?
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads(threads: Option<usize>, f: impl FnOnce() -> CliResult) -> CliResult {
    // single-threaded build: the flag is accepted and only checked
    if threads == Some(0) {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    f()
}
