use std::path::PathBuf;

use serde::Serialize;
use zzarray_core::compiler::{
    compile, gate_key, ideal_circuit_unitary, library_requirements, process_fidelity, simulate_schedule,
    verify_schedule, BlockShape, PulseLibrary,
};
use zzarray_core::hamiltonian::ArrayParameters;
use zzarray_core::robust::{optimize, Algorithm, OptimizationConfig, UncertaintySpec};

use super::{load_circuit, load_graph};
use crate::cli::{CliError, CliResult};
use crate::formats::{read_toml, write_toml, LibraryDoc, Meta, PulseDoc};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub circuit: PathBuf,
    /// Pulse library document; built by nominal optimization if omitted.
    #[arg(long)]
    pub library: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    #[arg(long, default_value_t = std::f64::consts::TAU)]
    pub duration: f64,
    #[arg(long, default_value_t = 10.0)]
    pub omega_max: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long, default_value_t = 2000)]
    pub max_evaluations: usize,
    /// Per-pulse infidelity at which library optimization stops early.
    #[arg(long, default_value_t = 1e-10)]
    pub target_infidelity: f64,
    #[arg(long, default_value = "zzarray-out")]
    pub output_dir: PathBuf,
    /// Exit with status 1 if the process fidelity is below this.
    #[arg(long)]
    pub require_fidelity: Option<f64>,
}

#[derive(Serialize)]
struct Resolved {
    graph: String,
    circuit: String,
    library: String,
    bins: usize,
    duration: f64,
    omega_max: f64,
    restarts: usize,
    max_evaluations: usize,
    target_infidelity: f64,
}

#[derive(Serialize)]
struct SimulationDoc {
    num_qubits: usize,
    gates: usize,
    steps: usize,
    process_fidelity: f64,
    process_infidelity: f64,
    meta: Meta,
}

pub fn run(args: Args) -> CliResult {
    let (_, graph) = load_graph(&args.graph)?;
    let circuit = load_circuit(&args.circuit, &graph)?;
    let schedule = compile(&circuit, &graph)?;
    let report = verify_schedule(&schedule, &circuit, &graph);
    if !report.is_valid() {
        return Err(CliError::failed("schedule failed verification"));
    }
    let resolved = Resolved {
        graph: args.graph.display().to_string(),
        circuit: args.circuit.display().to_string(),
        library: args.library.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        bins: args.bins,
        duration: args.duration,
        omega_max: args.omega_max,
        restarts: args.restarts,
        max_evaluations: args.max_evaluations,
        target_infidelity: args.target_infidelity,
    };
    let meta = Meta::new("simulate", args.seed, &resolved)?;

    let library = match &args.library {
        Some(path) => read_toml::<LibraryDoc>(path)?.library()?,
        None => {
            let config = OptimizationConfig {
                num_bins: args.bins,
                duration: args.duration,
                omega_max: args.omega_max,
                algorithm: Algorithm::AvgQuasiNewton,
                max_evaluations: args.max_evaluations,
                seed: args.seed,
                num_restarts: args.restarts,
                target_infidelity: Some(args.target_infidelity),
                ..OptimizationConfig::default()
            };
            config.validate()?;
            let mut lib = PulseLibrary::new();
            let mut pulses = Vec::new();
            for (gate, block) in library_requirements(&schedule) {
                let r = optimize(&block, &gate, &UncertaintySpec::none(), &config, &mut |_| true)?;
                eprintln!(
                    "pulse {} on {}: infidelity {:.3e}",
                    gate_key(&gate),
                    BlockShape::of(&block).describe(),
                    r.worst_case_infidelity()
                );
                pulses.push(PulseDoc::new(&gate, &block, r.worst_case, &r.controls));
                lib.insert(&gate, BlockShape::of(&block), r.controls)?;
            }
            write_toml(&args.output_dir.join("library.toml"), &LibraryDoc { pulses, meta: meta.clone() })?;
            lib
        }
    };

    let nq = graph.num_qubits();
    let u = simulate_schedule(&schedule, &graph, &library, &ArrayParameters::nominal(&graph))?.to_dense();
    let ideal = ideal_circuit_unitary(&circuit, nq)?;
    let f = process_fidelity(&ideal, &u)?;
    let doc = SimulationDoc {
        num_qubits: nq,
        gates: circuit.len(),
        steps: schedule.step_count(),
        process_fidelity: f,
        process_infidelity: 1.0 - f,
        meta,
    };
    write_toml(&args.output_dir.join("simulation.toml"), &doc)?;
    println!("{} gate(s) in {} step(s): process fidelity {f:.12}", circuit.len(), schedule.step_count());
    match args.require_fidelity {
        Some(bar) if !(f >= bar) => Err(CliError::failed(format!("process fidelity {f:.9} below {bar}"))),
        _ => Ok(()),
    }
}
