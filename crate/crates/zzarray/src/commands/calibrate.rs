use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use zzarray_core::calibration::{
    oracle_peaks, predict_peaks, random_unit_cell_cluster, recover_frequency, PeakSet, SpectroscopyCluster,
};

use super::load_graph;
use crate::cli::{CliError, CliResult};
use crate::formats::{emit, csv_string, Meta};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Graph document with `frequencies` and `target`.
    #[arg(long, conflicts_with = "random")]
    pub input: Option<PathBuf>,
    /// Number of random unit-cell clusters.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Uniform peak noise `[-eps, eps]`; recovery must stay within 5 eps.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Relative error bar on noiseless recovery.
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
    /// Table path (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct Resolved {
    input: String,
    random: usize,
    noise: f64,
    tolerance: f64,
}

fn max_peak_difference(a: &PeakSet, b: &PeakSet) -> f64 {
    a.one_photon
        .iter()
        .zip(&b.one_photon)
        .chain(a.two_photon.iter().zip(&b.two_photon))
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn perturb(p: &PeakSet, eps: f64, rng: &mut ChaCha8Rng) -> PeakSet {
    let mut q = *p;
    for v in q.one_photon.iter_mut().chain(q.two_photon.iter_mut()) {
        *v += rng.gen_range(-eps..=eps);
    }
    q
}

pub fn run(args: Args) -> CliResult {
    if !(args.tolerance > 0.0) || args.noise.is_some_and(|e| !(e >= 0.0 && e.is_finite())) {
        return Err(CliError::usage("--tolerance must be positive and --noise non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let clusters: Vec<SpectroscopyCluster> = match (&args.input, args.random) {
        (Some(path), None) => {
            let (doc, graph) = load_graph(path)?;
            let freqs = doc
                .frequencies
                .as_ref()
                .ok_or_else(|| CliError::usage(format!("{}: no `frequencies`", path.display())))?;
            let target = doc.target.ok_or_else(|| CliError::usage(format!("{}: no `target`", path.display())))?;
            vec![SpectroscopyCluster::from_graph(&graph, freqs, target)?]
        }
        (None, Some(n)) if n > 0 => (0..n).map(|_| random_unit_cell_cluster(&mut rng)).collect(),
        _ => return Err(CliError::usage("give either --input FILE or --random N (N > 0)")),
    };
    let resolved = Resolved {
        input: args.input.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        random: args.random.unwrap_or(0),
        noise: args.noise.unwrap_or(0.0),
        tolerance: args.tolerance,
    };
    let meta = Meta::new("calibrate", args.seed, &resolved)?;

    let mut header = ["cluster", "target", "true_frequency", "recovered", "relative_error", "oracle_residual"]
        .map(String::from)
        .to_vec();
    if args.noise.is_some() {
        header.extend(["noisy_recovered", "noisy_error", "noise_bound"].map(String::from));
    }
    let mut rows = Vec::new();
    let mut failures = 0;
    for (i, c) in clusters.iter().enumerate() {
        let peaks = predict_peaks(c);
        let oracle = oracle_peaks(c)?;
        let truth = c.target_frequency();
        let recovered = recover_frequency(&oracle);
        let rel = (recovered - truth).abs() / truth.abs();
        let residual = max_peak_difference(&peaks, &oracle);
        let scale = truth.abs().max(1.0);
        let mut ok = rel <= args.tolerance && residual <= 1e-12 * scale;
        let mut row = vec![
            i.to_string(),
            c.labels()[c.target()].to_string(),
            truth.to_string(),
            recovered.to_string(),
            rel.to_string(),
            residual.to_string(),
        ];
        if let Some(eps) = args.noise {
            let noisy = recover_frequency(&perturb(&oracle, eps, &mut rng));
            let err = (noisy - truth).abs();
            let bound = 5.0 * eps + args.tolerance * truth.abs();
            ok &= err <= bound;
            row.extend([noisy.to_string(), err.to_string(), bound.to_string()]);
        }
        failures += usize::from(!ok);
        rows.push(row);
    }
    emit(args.output.as_deref(), &csv_string(&meta, &header, &rows)?)?;
    if failures == 0 {
        eprintln!("{} cluster(s) recovered within tolerance", clusters.len());
        Ok(())
    } else {
        Err(CliError::failed(format!("{failures} of {} cluster(s) out of tolerance", clusters.len())))
    }
}
