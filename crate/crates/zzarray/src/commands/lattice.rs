use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;
use zzarray_core::lattice::{
    build_chain, build_honeycomb, build_square, single_qubit_pattern, two_qubit_pattern, CouplingAssignment,
    DrivingPattern, QubitGraph,
};

use crate::cli::{CliError, CliResult};
use crate::formats::{emit, to_toml, write_csv, GraphDoc, Meta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryArg {
    Honeycomb,
    Square,
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternArg {
    None,
    Single,
    Two,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum)]
    pub geometry: GeometryArg,
    /// Cell rows (honeycomb) or qubit rows (square).
    #[arg(long, default_value_t = 2)]
    pub rows: usize,
    #[arg(long, default_value_t = 2)]
    pub cols: usize,
    /// Number of qubits of a chain.
    #[arg(long, default_value_t = 5)]
    pub length: usize,
    /// Uniform coupling J in units of the mean coupling.
    #[arg(long, default_value_t = 1.0)]
    pub coupling: f64,
    #[arg(long, value_enum, default_value_t = PatternArg::None)]
    pub pattern: PatternArg,
    /// Gate pair of a two-qubit pattern (indices after removal).
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub pair: Option<Vec<usize>>,
    /// Qubits to delete from the generated patch; survivors are renumbered.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub remove: Vec<usize>,
    /// Graph document path (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Per-qubit table: index, coordinates, degree, driven flag.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Serialize)]
struct Resolved {
    geometry: GeometryArg,
    rows: usize,
    cols: usize,
    length: usize,
    coupling: f64,
    pattern: PatternArg,
    pair: Vec<usize>,
    remove: Vec<usize>,
}

pub fn build(args: &Args) -> CliResult<(QubitGraph, Option<DrivingPattern>)> {
    if !(args.coupling.is_finite() && args.coupling > 0.0) {
        return Err(CliError::usage("--coupling must be positive"));
    }
    let j = CouplingAssignment::Uniform(args.coupling);
    let mut graph = match args.geometry {
        GeometryArg::Honeycomb => build_honeycomb(args.rows, args.cols, &j)?,
        GeometryArg::Square => build_square(args.rows, args.cols, &j)?,
        GeometryArg::Chain => build_chain(args.length, &j)?,
    };
    if !args.remove.is_empty() {
        let keep: Vec<usize> = (0..graph.num_qubits()).filter(|q| !args.remove.contains(q)).collect();
        if let Some(&q) = args.remove.iter().find(|&&q| q >= graph.num_qubits()) {
            return Err(CliError::usage(format!("--remove: qubit {q} does not exist")));
        }
        graph = graph.induced_subgraph(&keep)?;
    }
    let pattern = match (args.pattern, &args.pair) {
        (PatternArg::None, None) => None,
        (PatternArg::Single, None) => Some(single_qubit_pattern(&graph)?),
        (PatternArg::Two, Some(p)) => Some(two_qubit_pattern(&graph, (p[0], p[1]))?),
        (PatternArg::Two, None) => return Err(CliError::usage("--pattern two needs --pair A B")),
        (_, Some(_)) => return Err(CliError::usage("--pair is only used with --pattern two")),
    };
    Ok((graph, pattern))
}

pub fn run(args: Args) -> CliResult {
    let (graph, pattern) = build(&args)?;
    let resolved = Resolved {
        geometry: args.geometry,
        rows: args.rows,
        cols: args.cols,
        length: args.length,
        coupling: args.coupling,
        pattern: args.pattern,
        pair: args.pair.clone().unwrap_or_default(),
        remove: args.remove.clone(),
    };
    let meta = Meta::new("lattice", 0, &resolved)?;
    let mut doc = GraphDoc::from_graph(&graph, pattern.as_ref());
    doc.meta = Some(meta.clone());
    emit(args.output.as_deref(), &to_toml(&doc)?)?;
    if let Some(path) = &args.table {
        let header = ["qubit", "row", "col", "degree", "driven"].map(String::from);
        let rows: Vec<Vec<String>> = (0..graph.num_qubits())
            .map(|q| {
                let (r, c) = graph.coords().map_or((0, q as i64), |c| c[q]);
                let driven = pattern.as_ref().is_some_and(|p| p.is_driven(q));
                vec![q.to_string(), r.to_string(), c.to_string(), graph.degree(q).to_string(), (driven as u8).to_string()]
            })
            .collect();
        write_csv(path, &meta, &header, &rows)?;
    }
    Ok(())
}
