pub mod calibrate;
pub mod compile;
pub mod lattice;
pub mod optimize;
pub mod simulate;
pub mod validate;

use std::path::Path;

use zzarray_core::compiler::Circuit;
use zzarray_core::lattice::QubitGraph;

use crate::cli::CliResult;
use crate::formats::{read_text, read_toml, GraphDoc};

pub(crate) fn load_graph(path: &Path) -> CliResult<(GraphDoc, QubitGraph)> {
    let doc: GraphDoc = read_toml(path)?;
    let graph = doc.graph()?;
    Ok((doc, graph))
}

pub(crate) fn load_circuit(path: &Path, graph: &QubitGraph) -> CliResult<Circuit> {
    let circuit = Circuit::parse(&read_text(path)?)
        .map_err(|e| crate::cli::CliError::usage(format!("{}: {e}", path.display())))?;
    circuit.validate(graph).map_err(|e| crate::cli::CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(circuit)
}
