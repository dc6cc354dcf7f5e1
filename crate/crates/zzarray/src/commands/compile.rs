use std::path::PathBuf;

use serde::Serialize;
use zzarray_core::compiler::{compile, verify_schedule};

use super::{load_circuit, load_graph};
use crate::cli::{CliError, CliResult};
use crate::formats::{emit, to_toml, Meta, ScheduleDoc};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub graph: PathBuf,
    /// One instruction per line, e.g. `CNOT 2 6`.
    #[arg(long)]
    pub circuit: PathBuf,
    /// Schedule document path (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct Resolved {
    graph: String,
    circuit: String,
}

pub fn run(args: Args) -> CliResult {
    let (_, graph) = load_graph(&args.graph)?;
    let circuit = load_circuit(&args.circuit, &graph)?;
    let schedule = compile(&circuit, &graph)?;
    let report = verify_schedule(&schedule, &circuit, &graph);
    let resolved = Resolved { graph: args.graph.display().to_string(), circuit: args.circuit.display().to_string() };
    let doc = ScheduleDoc::new(&schedule, &report, Meta::new("compile", 0, &resolved)?);
    emit(args.output.as_deref(), &to_toml(&doc)?)?;
    eprintln!(
        "{} gate(s), depth {}, {} step(s), overhead {:.2}{}",
        circuit.len(),
        report.circuit_depth,
        report.step_count,
        report.overhead,
        if report.overhead_exceeded { " (above 2)" } else { "" }
    );
    if report.is_valid() {
        Ok(())
    } else {
        Err(CliError::failed(format!("schedule failed verification: {}", doc.issues.join("; "))))
    }
}
