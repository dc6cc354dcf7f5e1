use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use zzarray_core::hamiltonian::{embedded_block_hamiltonian, ArrayParameters, ControlVector, OperatorMatrix};
use zzarray_core::lattice::{decompose_blocks, validate_pattern, Block, QubitGraph};
use zzarray_core::propagation::{evolve_array, evolve_blocks, MAX_ARRAY_QUBITS};

use super::load_graph;
use crate::cli::{CliError, CliResult};
use crate::formats::{write_toml, Meta};

/// Largest array for the explicit commutator check.
const MAX_COMMUTATOR_QUBITS: usize = 14;
const COMMUTATOR_TOLERANCE: f64 = 1e-12;
const EQUIVALENCE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Graph document with `driven` (and optional `gate_pairs`).
    pub graph: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Bins of the random test pulses.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, default_value_t = std::f64::consts::TAU)]
    pub duration: f64,
    /// Random pulses are uniform in `[-amplitude, amplitude]`.
    #[arg(long, default_value_t = 2.0)]
    pub amplitude: f64,
    /// Report document path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: String,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Serialize)]
struct Report {
    passed: bool,
    num_qubits: usize,
    num_blocks: usize,
    checks: Vec<Check>,
    meta: Meta,
}

#[derive(Serialize)]
struct Resolved {
    graph: String,
    bins: usize,
    duration: f64,
    amplitude: f64,
}

fn check(name: &str, pass: Option<bool>, value: f64, tolerance: f64, detail: String) -> Check {
    let status = match pass {
        Some(true) => "pass",
        Some(false) => "fail",
        None => "skipped",
    };
    Check { name: name.into(), status: status.into(), value, tolerance, detail }
}

/// Block Hamiltonians commute exactly when no qubit driven in one block
/// belongs to another: Z-only overlaps commute.
fn structural_overlap(blocks: &[Block]) -> Option<(usize, usize, usize)> {
    for (i, a) in blocks.iter().enumerate() {
        for (k, b) in blocks.iter().enumerate() {
            if i != k {
                if let Some(&q) = a.center().iter().find(|&&q| b.contains(q)) {
                    return Some((i, k, q));
                }
            }
        }
    }
    None
}

fn max_commutator(graph: &QubitGraph, blocks: &[Block], controls: &[ControlVector]) -> CliResult<f64> {
    let params = ArrayParameters::nominal(graph);
    let bins = controls.first().map_or(0, |c| c.num_bins());
    let mut worst = 0.0f64;
    for n in [0, bins.saturating_sub(1)] {
        let hs = blocks
            .iter()
            .zip(controls)
            .map(|(b, c)| Ok(OperatorMatrix::Sparse(embedded_block_hamiltonian(graph, b, c, &params, n)?)))
            .collect::<CliResult<Vec<_>>>()?;
        for i in 0..hs.len() {
            for k in i + 1..hs.len() {
                worst = worst.max(hs[i].commutator(&hs[k]).max_abs());
            }
        }
    }
    Ok(worst)
}

pub fn run(args: Args) -> CliResult {
    if args.bins == 0 || !(args.duration > 0.0) || !(args.amplitude >= 0.0) {
        return Err(CliError::usage("--bins, --duration and --amplitude must be positive"));
    }
    let (doc, graph) = load_graph(&args.graph)?;
    let pattern = doc
        .pattern()
        .ok_or_else(|| CliError::usage(format!("{}: no `driven` list in the graph document", args.graph.display())))?;
    let resolved = Resolved {
        graph: args.graph.display().to_string(),
        bins: args.bins,
        duration: args.duration,
        amplitude: args.amplitude,
    };
    let meta = Meta::new("validate", args.seed, &resolved)?;
    let nq = graph.num_qubits();
    let mut checks = Vec::new();

    let pattern_report = validate_pattern(&graph, &pattern);
    let valid = pattern_report.is_valid();
    checks.push(check(
        "pattern",
        Some(valid),
        pattern_report.violations.len() as f64,
        0.0,
        if valid { "no violations".into() } else { pattern_report.summary() },
    ));

    let mut num_blocks = 0;
    if valid {
        let blocks = decompose_blocks(&graph, &pattern)?;
        num_blocks = blocks.len();
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let a = args.amplitude;
        let controls = blocks
            .iter()
            .map(|b| {
                let nc = b.center().len();
                let v = (0..2 * args.bins * nc).map(|_| if a > 0.0 { rng.gen_range(-a..=a) } else { 0.0 }).collect();
                ControlVector::from_values(args.duration, args.bins, nc, v)
            })
            .collect::<Result<Vec<_>, _>>()?;

        let overlap = structural_overlap(&blocks);
        checks.push(check(
            "disjoint_drives",
            Some(overlap.is_none()),
            overlap.is_some() as u8 as f64,
            0.0,
            match overlap {
                None => format!("{} blocks, no driven qubit shared", blocks.len()),
                Some((i, k, q)) => format!("qubit {q} is driven in block {i} and belongs to block {k}"),
            },
        ));

        if nq <= MAX_COMMUTATOR_QUBITS {
            let c = max_commutator(&graph, &blocks, &controls)?;
            let pass = c <= COMMUTATOR_TOLERANCE;
            checks.push(check("commutators", Some(pass), c, COMMUTATOR_TOLERANCE, "max |[H_k, H_l]| over block pairs".into()));
        } else {
            checks.push(check("commutators", None, 0.0, COMMUTATOR_TOLERANCE, format!("{nq} qubits exceed {MAX_COMMUTATOR_QUBITS}")));
        }

        if nq <= MAX_ARRAY_QUBITS {
            let params = ArrayParameters::nominal(&graph);
            let full = evolve_array(&graph, &pattern, &controls, &params)?;
            let product = OperatorMatrix::Dense(evolve_blocks(&graph, &pattern, &controls, &params)?);
            let d = full.max_abs_diff(&product);
            let pass = d <= EQUIVALENCE_TOLERANCE;
            checks.push(check("equivalence", Some(pass), d, EQUIVALENCE_TOLERANCE, "max |U_full - U_blocks|".into()));
        } else {
            checks.push(check("equivalence", None, 0.0, EQUIVALENCE_TOLERANCE, format!("{nq} qubits exceed {MAX_ARRAY_QUBITS}")));
        }
    }

    let passed = checks.iter().all(|c| c.status != "fail");
    for c in &checks {
        println!("{:<16} {:<7} {:.3e}  {}", c.name, c.status, c.value, c.detail);
    }
    if let Some(path) = &args.report {
        write_toml(path, &Report { passed, num_qubits: nq, num_blocks, checks, meta })?;
    }
    if passed {
        Ok(())
    } else {
        Err(CliError::failed("decomposition checks failed"))
    }
}
