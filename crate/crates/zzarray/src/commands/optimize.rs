use std::cell::RefCell;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zzarray_core::lattice::{canonical_block, BlockKind};
use zzarray_core::propagation::{GradientMode, TargetGate};
use zzarray_core::robust::{optimize, optimize_from, Algorithm, OptimizationConfig, UncertaintySpec};

use crate::cli::{CliError, CliResult};
use crate::formats::{
    pulse_table, read_toml, write_csv, write_toml, CheckpointDoc, ControlsDoc, Meta, ResultDoc, StartDoc,
};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Settings file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// honeycomb-1q, honeycomb-2q, chain-1q, chain-2q, square-1q, square-2q.
    #[arg(long)]
    pub block: Option<String>,
    /// H, T, I, X, CNOT.
    #[arg(long)]
    pub target: Option<String>,
    /// Relative coupling, relative amplitude and detuning (units of J̄) widths.
    #[arg(long, num_args = 3, value_names = ["DJ", "DALPHA", "DDELTA"])]
    pub uncertainty: Option<Vec<f64>>,
    #[arg(long)]
    pub coupling: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Pulse length in units of 1/J̄.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Amplitude bound in units of J̄.
    #[arg(long)]
    pub omega_max: Option<f64>,
    /// scp or avg.
    #[arg(long)]
    pub algorithm: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub max_evaluations: Option<usize>,
    #[arg(long)]
    pub step_tolerance: Option<f64>,
    #[arg(long)]
    pub trust_region: Option<f64>,
    #[arg(long)]
    pub initial_amplitude: Option<f64>,
    /// Stop once the worst-case infidelity reaches this value.
    #[arg(long)]
    pub target_infidelity: Option<f64>,
    /// exact or second-order.
    #[arg(long)]
    pub gradient: Option<String>,
    /// Iterations between checkpoints (0 disables them).
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Result or checkpoint document whose controls seed the run.
    #[arg(long, alias = "resume")]
    pub start_from: Option<PathBuf>,
    #[arg(long, default_value = "zzarray-out")]
    pub output_dir: PathBuf,
    /// Exit with status 1 if the worst-case infidelity exceeds this.
    #[arg(long)]
    pub require_infidelity: Option<f64>,
    #[arg(long)]
    pub quiet: bool,
}

/// Fully resolved settings; also the schema of `--config` files, where
/// every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub block: String,
    pub target: String,
    pub uncertainty: [f64; 3],
    pub coupling: f64,
    pub bins: usize,
    pub duration: f64,
    pub omega_max: f64,
    pub algorithm: String,
    pub seed: u64,
    pub restarts: usize,
    pub max_iterations: usize,
    pub max_evaluations: usize,
    pub step_tolerance: f64,
    pub trust_region: f64,
    pub growth: f64,
    pub shrink: f64,
    pub initial_amplitude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_infidelity: Option<f64>,
    pub gradient: String,
    pub checkpoint_every: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_from: Option<String>,
}

impl Default for Settings {
    fn default() -> Self {
        let c = OptimizationConfig::default();
        Self {
            block: BlockKind::HoneycombSingle.as_str().into(),
            target: "H".into(),
            uncertainty: [0.0; 3],
            coupling: 1.0,
            bins: c.num_bins,
            duration: c.duration,
            omega_max: c.omega_max,
            algorithm: Algorithm::AvgQuasiNewton.as_str().into(),
            seed: c.seed,
            restarts: c.num_restarts,
            max_iterations: c.max_iterations,
            max_evaluations: c.max_evaluations,
            step_tolerance: c.step_tolerance,
            trust_region: c.trust_region_init,
            growth: c.growth,
            shrink: c.shrink,
            initial_amplitude: c.initial_amplitude,
            target_infidelity: None,
            gradient: "exact".into(),
            checkpoint_every: 25,
            start_from: None,
        }
    }
}

impl Settings {
    pub fn resolve(args: &Args) -> CliResult<Self> {
        let mut s: Settings = match &args.config {
            Some(path) => read_toml(path)?,
            None => Settings::default(),
        };
        macro_rules! set {
            ($field:ident, $value:expr) => {
                if let Some(v) = $value {
                    s.$field = v;
                }
            };
        }
        set!(block, args.block.clone());
        set!(target, args.target.clone());
        set!(coupling, args.coupling);
        set!(bins, args.bins);
        set!(duration, args.duration);
        set!(omega_max, args.omega_max);
        set!(algorithm, args.algorithm.clone());
        set!(seed, args.seed);
        set!(restarts, args.restarts);
        set!(max_iterations, args.max_iterations);
        set!(max_evaluations, args.max_evaluations);
        set!(step_tolerance, args.step_tolerance);
        set!(trust_region, args.trust_region);
        set!(initial_amplitude, args.initial_amplitude);
        set!(gradient, args.gradient.clone());
        set!(checkpoint_every, args.checkpoint_every);
        if let Some(u) = &args.uncertainty {
            s.uncertainty = [u[0], u[1], u[2]];
        }
        if args.target_infidelity.is_some() {
            s.target_infidelity = args.target_infidelity;
        }
        if let Some(p) = &args.start_from {
            s.start_from = Some(p.display().to_string());
        }
        Ok(s)
    }

    pub fn block_kind(&self) -> CliResult<BlockKind> {
        BlockKind::parse(&self.block).ok_or_else(|| CliError::usage(format!("unknown block '{}'", self.block)))
    }

    pub fn target_gate(&self, num_center: usize) -> CliResult<TargetGate> {
        let gate =
            TargetGate::parse(&self.target).ok_or_else(|| CliError::usage(format!("unknown target '{}'", self.target)))?;
        if gate.num_qubits() == num_center {
            return Ok(gate);
        }
        if self.target.eq_ignore_ascii_case("I") {
            return Ok(TargetGate::identity_for(num_center));
        }
        Err(CliError::usage(format!(
            "target {} acts on {} qubit(s) but block {} drives {num_center}",
            self.target,
            gate.num_qubits(),
            self.block
        )))
    }

    pub fn uncertainty_spec(&self) -> UncertaintySpec {
        UncertaintySpec { nominal_coupling: self.coupling, ..UncertaintySpec::new(self.uncertainty[0], self.uncertainty[1], self.uncertainty[2]) }
    }

    pub fn config(&self) -> CliResult<OptimizationConfig> {
        let algorithm = Algorithm::parse(&self.algorithm)
            .ok_or_else(|| CliError::usage(format!("unknown algorithm '{}'", self.algorithm)))?;
        let gradient_mode = match self.gradient.as_str() {
            "exact" => GradientMode::Exact,
            "second-order" | "second_order" => GradientMode::SecondOrder,
            g => return Err(CliError::usage(format!("unknown gradient mode '{g}'"))),
        };
        let c = OptimizationConfig {
            num_bins: self.bins,
            duration: self.duration,
            omega_max: self.omega_max,
            algorithm,
            max_iterations: self.max_iterations,
            max_evaluations: self.max_evaluations,
            step_tolerance: self.step_tolerance,
            trust_region_init: self.trust_region,
            growth: self.growth,
            shrink: self.shrink,
            seed: self.seed,
            num_restarts: self.restarts,
            initial_amplitude: self.initial_amplitude,
            target_infidelity: self.target_infidelity,
            gradient_mode,
        };
        c.validate()?;
        Ok(c)
    }
}

fn progress_row(p: &zzarray_core::robust::Progress<'_>) -> Vec<String> {
    vec![
        p.restart.to_string(),
        p.iteration.to_string(),
        p.evaluations.to_string(),
        (1.0 - p.f_min).to_string(),
        (1.0 - p.f_mean).to_string(),
        p.trust_region.to_string(),
    ]
}

pub fn run(args: Args) -> CliResult {
    let settings = Settings::resolve(&args)?;
    let kind = settings.block_kind()?;
    if !(settings.coupling.is_finite() && settings.coupling > 0.0) {
        return Err(CliError::usage("coupling must be positive"));
    }
    let block = canonical_block(kind, settings.coupling)?;
    let target = settings.target_gate(block.center().len())?;
    let spec = settings.uncertainty_spec();
    spec.validate()?;
    let mut config = settings.config()?;
    let start = match &args.start_from {
        Some(path) => {
            let doc: StartDoc = read_toml(path)?;
            if let Some(u) = doc.trust_region.filter(|&u| u > 0.0) {
                config.trust_region_init = u;
            }
            let c = doc.controls.controls()?;
            if c.num_center() != block.center().len() || c.num_bins() != config.num_bins || c.duration() != config.duration {
                return Err(CliError::usage(format!("{}: controls do not match the block and time grid", path.display())));
            }
            Some(c)
        }
        None => None,
    };
    let meta = Meta::new("optimize", settings.seed, &settings)?;
    let dir = args.output_dir.as_path();
    let checkpoint_path = dir.join("checkpoint.toml");
    let rows = RefCell::new(Vec::new());
    let checkpoint_error = RefCell::new(None);
    let mut observer = |p: &zzarray_core::robust::Progress<'_>| {
        rows.borrow_mut().push(progress_row(p));
        if !args.quiet {
            eprintln!(
                "restart {} iter {:>5} evals {:>6} worst 1-F {:.3e} mean 1-F {:.3e}",
                p.restart,
                p.iteration,
                p.evaluations,
                1.0 - p.f_min,
                1.0 - p.f_mean
            );
        }
        if settings.checkpoint_every > 0 && p.iteration.is_multiple_of(settings.checkpoint_every) {
            let doc = CheckpointDoc {
                restart: p.restart,
                iteration: p.iteration,
                evaluations: p.evaluations,
                worst_case_fidelity: p.f_min,
                mean_fidelity: p.f_mean,
                trust_region: p.trust_region,
                controls: ControlsDoc::from_controls(p.controls),
                meta: meta.clone(),
            };
            if let Err(e) = write_toml(&checkpoint_path, &doc) {
                *checkpoint_error.borrow_mut() = Some(e);
                return false;
            }
        }
        true
    };
    let result = match start {
        Some(c) => optimize_from(&block, &target, &spec, &config, c, &mut observer)?,
        None => optimize(&block, &target, &spec, &config, &mut observer)?,
    };
    if let Some(e) = checkpoint_error.into_inner() {
        return Err(e.into());
    }
    write_outputs(dir, &settings, &meta, &result, &rows.into_inner())?;
    let inf = result.worst_case_infidelity();
    println!(
        "{} on {}: worst-case infidelity {:.3e}, mean infidelity {:.3e}, {} corners, {} ({} evaluations)",
        settings.target,
        settings.block,
        inf,
        1.0 - result.mean_fidelity,
        result.corner_masks.len(),
        result.termination.as_str(),
        result.evaluations
    );
    match args.require_infidelity {
        Some(bar) if !(inf <= bar) => Err(CliError::failed(format!("worst-case infidelity {inf:.3e} exceeds {bar:.3e}"))),
        _ => Ok(()),
    }
}

fn write_outputs(
    dir: &Path,
    settings: &Settings,
    meta: &Meta,
    result: &zzarray_core::robust::OptimizationResult,
    trace: &[Vec<String>],
) -> CliResult {
    write_toml(&dir.join("result.toml"), &ResultDoc::new(&settings.block, &settings.target, result, meta.clone()))?;
    let (header, rows) = pulse_table(&result.controls);
    write_csv(&dir.join("pulses.csv"), meta, &header, &rows)?;
    let header = ["restart", "iteration", "evaluations", "worst_infidelity", "mean_infidelity", "trust_region"]
        .map(String::from);
    write_csv(&dir.join("convergence.csv"), meta, &header, trace)?;
    Ok(())
}
