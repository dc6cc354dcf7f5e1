//! Parameter uncertainty, worst-case fidelity over hypercube corners and
//! the two robust optimizers.
//!
//! * [`optimize_scp`] maximizes the worst corner fidelity directly: each
//!   iteration solves `max t s.t. ∇F_i·δc ≥ t` inside an `∞`-norm trust
//!   region, growing the region by `growth` on success and dividing it by
//!   `shrink` otherwise.
//! * [`optimize_avg`] maximizes the mean corner fidelity with projected
//!   L-BFGS under the amplitude box.

pub mod lbfgs;
pub mod lp;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hamiltonian::{ControlVector, ParameterPoint};
use crate::lattice::Block;
use crate::propagation::{BlockPropagator, GradientMode, TargetGate, Workspace};
use crate::{Error, Result};

use lbfgs::{LbfgsOptions, LbfgsStop};

/// Largest number of uncertain parameters accepted (2^24 corners).
pub const MAX_UNCERTAIN_PARAMETERS: usize = 24;

/// Full interval widths of the uncertain parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintySpec {
    /// `ΔJ/J̄`: each coupling varies in `J(1 ± frac/2)`.
    pub coupling_frac: f64,
    /// `Δα`: each amplitude scale varies in `1 ± frac/2`.
    pub amplitude_frac: f64,
    /// `Δδ/J̄`: each detuning varies in `±frac·J̄/2`.
    pub detuning_frac: f64,
    /// `J̄`, the unit for detunings.
    pub nominal_coupling: f64,
}

impl Default for UncertaintySpec {
    fn default() -> Self {
        Self::none()
    }
}

impl UncertaintySpec {
    pub fn none() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn new(coupling_frac: f64, amplitude_frac: f64, detuning_frac: f64) -> Self {
        Self { coupling_frac, amplitude_frac, detuning_frac, nominal_coupling: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let f = [self.coupling_frac, self.amplitude_frac, self.detuning_frac];
        if f.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidConfig("uncertainty fractions must be finite and non-negative".into()));
        }
        if !(self.nominal_coupling.is_finite() && self.nominal_coupling > 0.0) {
            return Err(Error::InvalidConfig("nominal coupling must be positive".into()));
        }
        if self.amplitude_frac >= 2.0 {
            return Err(Error::InvalidConfig("amplitude fraction must be below 2 (α > 0)".into()));
        }
        Ok(())
    }

    /// Half-widths of every block parameter in corner order (couplings,
    /// then amplitudes, then detunings), relative to the nominal point.
    fn half_widths(&self, block: &Block) -> Vec<f64> {
        let nc = block.center().len();
        let mut w: Vec<f64> =
            block.couplings().iter().map(|c| (c.coupling * self.coupling_frac / 2.0).abs()).collect();
        w.extend(core::iter::repeat_n(self.amplitude_frac / 2.0, nc));
        w.extend(core::iter::repeat_n(self.detuning_frac * self.nominal_coupling / 2.0, nc));
        w
    }
}

/// One extreme point of the uncertainty box.
#[derive(Debug, Clone, PartialEq)]
pub struct Corner {
    /// Bit `k` set means parameter `k` (couplings, then amplitudes, then
    /// detunings) sits at its upper end.
    pub mask: u64,
    pub point: ParameterPoint,
}

fn offset_point(block: &Block, offsets: &[f64]) -> ParameterPoint {
    let mut p = ParameterPoint::nominal(block);
    let ne = p.couplings.len();
    let nc = p.amplitude_scales.len();
    for (k, off) in offsets.iter().enumerate() {
        if k < ne {
            p.couplings[k] += off;
        } else if k < ne + nc {
            p.amplitude_scales[k - ne] += off;
        } else {
            p.detunings[k - ne - nc] += off;
        }
    }
    p
}

/// All `2^{n_u}` corners, enumerated by binary counting over the uncertain
/// parameters (parameters with zero width are not uncertain and stay
/// nominal, so zero uncertainty yields the single nominal point).
pub fn hypercube_corners(block: &Block, spec: &UncertaintySpec) -> Result<Vec<Corner>> {
    spec.validate()?;
    let widths = spec.half_widths(block);
    let uncertain: Vec<usize> = (0..widths.len()).filter(|&k| widths[k] > 0.0).collect();
    if uncertain.len() > MAX_UNCERTAIN_PARAMETERS {
        return Err(Error::TooManyCorners(uncertain.len()));
    }
    let mut corners = Vec::with_capacity(1 << uncertain.len());
    for i in 0..1u64 << uncertain.len() {
        let mut offsets = vec![0.0; widths.len()];
        let mut mask = 0u64;
        for (bit, &k) in uncertain.iter().enumerate() {
            if i >> bit & 1 == 1 {
                offsets[k] = widths[k];
                mask |= 1 << k;
            } else {
                offsets[k] = -widths[k];
            }
        }
        corners.push(Corner { mask, point: offset_point(block, &offsets) });
    }
    Ok(corners)
}

/// A uniformly random point inside the uncertainty box.
pub fn sample_interior<R: Rng>(block: &Block, spec: &UncertaintySpec, rng: &mut R) -> ParameterPoint {
    let offsets: Vec<f64> =
        spec.half_widths(block).iter().map(|&w| if w > 0.0 { rng.gen_range(-w..=w) } else { 0.0 }).collect();
    offset_point(block, &offsets)
}

/// Fidelities (and optionally gradients) of one control vector at every
/// corner, in corner order.
#[derive(Debug, Clone)]
pub struct CornerEvaluator {
    propagator: BlockPropagator,
    corners: Vec<Corner>,
}

impl CornerEvaluator {
    pub fn new(block: &Block, target: &TargetGate, corners: Vec<Corner>) -> Result<Self> {
        if corners.is_empty() {
            return Err(Error::InvalidConfig("at least one corner is required".into()));
        }
        Ok(Self { propagator: BlockPropagator::new(block, target)?, corners })
    }

    pub fn with_mode(mut self, mode: GradientMode) -> Self {
        self.propagator = self.propagator.with_mode(mode);
        self
    }

    pub fn corners(&self) -> &[Corner] {
        &self.corners
    }

    pub fn fidelities(&self, controls: &ControlVector) -> Result<Vec<f64>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            self.corners
                .par_iter()
                .map_init(Workspace::default, |ws, c| self.propagator.evaluate(controls, &c.point, None, ws))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            let mut ws = Workspace::default();
            self.corners.iter().map(|c| self.propagator.evaluate(controls, &c.point, None, &mut ws)).collect()
        }
    }

    pub fn fidelities_and_gradients(&self, controls: &ControlVector) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let one = |ws: &mut Workspace, c: &Corner| -> Result<(f64, Vec<f64>)> {
            let mut g = vec![0.0; controls.len()];
            let f = self.propagator.evaluate(controls, &c.point, Some(&mut g), ws)?;
            Ok((f, g))
        };
        #[cfg(feature = "parallel")]
        let pairs: Vec<(f64, Vec<f64>)> = {
            use rayon::prelude::*;
            self.corners.par_iter().map_init(Workspace::default, one).collect::<Result<_>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let pairs: Vec<(f64, Vec<f64>)> = {
            let mut ws = Workspace::default();
            self.corners.iter().map(|c| one(&mut ws, c)).collect::<Result<_>>()?
        };
        Ok(pairs.into_iter().unzip())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstCase {
    pub f_min: f64,
    /// Index into the corner list.
    pub argmin: usize,
    pub values: Vec<f64>,
}

fn summarize(values: &[f64]) -> (f64, usize, f64) {
    let mut argmin = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[argmin] {
            argmin = i;
        }
    }
    (values[argmin], argmin, values.iter().sum::<f64>() / values.len() as f64)
}

/// Exact minimum fidelity over `corners`.
pub fn worst_case_fidelity(
    block: &Block,
    controls: &ControlVector,
    corners: &[Corner],
    target: &TargetGate,
) -> Result<WorstCase> {
    let values = CornerEvaluator::new(block, target, corners.to_vec())?.fidelities(controls)?;
    let (f_min, argmin, _) = summarize(&values);
    Ok(WorstCase { f_min, argmin, values })
}

/// Lowest fidelity over `samples` random interior points.
pub fn interior_minimum(
    block: &Block,
    controls: &ControlVector,
    target: &TargetGate,
    spec: &UncertaintySpec,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    spec.validate()?;
    let prop = BlockPropagator::new(block, target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ws = Workspace::default();
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let p = sample_interior(block, spec, &mut rng);
        worst = worst.min(prop.evaluate(controls, &p, None, &mut ws)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    ScpMinimax,
    AvgQuasiNewton,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::ScpMinimax => "scp_minimax",
            Algorithm::AvgQuasiNewton => "avg_quasi_newton",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "scp_minimax" | "scp" => Some(Algorithm::ScpMinimax),
            "avg_quasi_newton" | "avg" => Some(Algorithm::AvgQuasiNewton),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationConfig {
    pub num_bins: usize,
    pub duration: f64,
    pub omega_max: f64,
    pub algorithm: Algorithm,
    /// SCP iteration cap.
    pub max_iterations: usize,
    /// Fidelity-evaluation cap of the average-fidelity optimizer.
    pub max_evaluations: usize,
    /// SCP stops when the trust region falls below this.
    pub step_tolerance: f64,
    pub trust_region_init: f64,
    pub growth: f64,
    pub shrink: f64,
    pub seed: u64,
    pub num_restarts: usize,
    /// Initial envelopes are uniform in `±initial_amplitude`.
    pub initial_amplitude: f64,
    /// Stop (and skip further restarts) once `1 − F_min` is at or below
    /// this.
    pub target_infidelity: Option<f64>,
    pub gradient_mode: GradientMode,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            num_bins: 100,
            duration: 2.0 * core::f64::consts::PI,
            omega_max: 10.0,
            algorithm: Algorithm::ScpMinimax,
            max_iterations: 500,
            max_evaluations: 2000,
            step_tolerance: 1e-8,
            trust_region_init: 0.5,
            growth: 1.15,
            shrink: 2.0,
            seed: 0,
            num_restarts: 1,
            initial_amplitude: 0.5,
            target_infidelity: None,
            gradient_mode: GradientMode::Exact,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.num_bins == 0 {
            return bad("num_bins must be at least 1");
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad("duration must be positive");
        }
        if !(self.omega_max.is_finite() && self.omega_max > 0.0) {
            return bad("omega_max must be positive");
        }
        if !(self.growth > 1.0 && self.shrink > 1.0) {
            return bad("trust region needs growth > 1 and shrink > 1");
        }
        if !(self.trust_region_init > 0.0 && self.step_tolerance >= 0.0) {
            return bad("trust region must start positive");
        }
        if self.num_restarts == 0 {
            return bad("num_restarts must be at least 1");
        }
        if !(self.initial_amplitude >= 0.0 && self.initial_amplitude <= self.omega_max) {
            return bad("initial amplitude must lie in [0, omega_max]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxIterations,
    MaxEvaluations,
    StepTolerance,
    GradientTolerance,
    LineSearchFailed,
    TargetReached,
    Stopped,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::MaxIterations => "max_iterations",
            Termination::MaxEvaluations => "max_evaluations",
            Termination::StepTolerance => "step_tolerance",
            Termination::GradientTolerance => "gradient_tolerance",
            Termination::LineSearchFailed => "line_search_failed",
            Termination::TargetReached => "target_reached",
            Termination::Stopped => "stopped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub f_min: f64,
    pub f_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub controls: ControlVector,
    pub corner_masks: Vec<u64>,
    pub per_corner_fidelities: Vec<f64>,
    pub worst_case: f64,
    pub worst_corner: usize,
    pub mean_fidelity: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Trace of the restart that produced `controls`.
    pub trace: Vec<TraceEntry>,
    pub termination: Termination,
    /// Which restart produced the result.
    pub restart: usize,
}

impl OptimizationResult {
    pub fn worst_case_infidelity(&self) -> f64 {
        1.0 - self.worst_case
    }
}

/// Snapshot handed to observers after every iteration.
#[derive(Debug)]
pub struct Progress<'a> {
    pub restart: usize,
    pub iteration: usize,
    pub evaluations: usize,
    pub f_min: f64,
    pub f_mean: f64,
    /// Current SCP trust-region radius (zero for the average optimizer).
    pub trust_region: f64,
    pub controls: &'a ControlVector,
}

/// Return `false` to stop the current run.
pub type Observer<'a> = dyn FnMut(&Progress<'_>) -> bool + 'a;

fn random_controls(config: &OptimizationConfig, num_center: usize, rng: &mut ChaCha8Rng) -> Result<ControlVector> {
    let a = config.initial_amplitude;
    let v = (0..2 * config.num_bins * num_center).map(|_| if a > 0.0 { rng.gen_range(-a..=a) } else { 0.0 }).collect();
    ControlVector::from_values(config.duration, config.num_bins, num_center, v)
}

fn reached(config: &OptimizationConfig, f_min: f64) -> bool {
    config.target_infidelity.is_some_and(|t| 1.0 - f_min <= t)
}

/// Runs `config.num_restarts` optimizations from random starts and keeps
/// the one with the best worst-case fidelity.
pub fn optimize(
    block: &Block,
    target: &TargetGate,
    spec: &UncertaintySpec,
    config: &OptimizationConfig,
    observer: &mut Observer<'_>,
) -> Result<OptimizationResult> {
    config.validate()?;
    let evaluator = CornerEvaluator::new(block, target, hypercube_corners(block, spec)?)?.with_mode(config.gradient_mode);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<OptimizationResult> = None;
    for restart in 0..config.num_restarts {
        let start = random_controls(config, block.center().len(), &mut rng)?;
        let result = run(&evaluator, config, start, restart, observer)?;
        let better = best.as_ref().is_none_or(|b| result.worst_case > b.worst_case);
        if better {
            best = Some(result);
        }
        if best.as_ref().is_some_and(|b| reached(config, b.worst_case)) {
            break;
        }
    }
    Ok(best.expect("at least one restart"))
}

/// One run of the configured algorithm from `start`.
pub fn optimize_from(
    block: &Block,
    target: &TargetGate,
    spec: &UncertaintySpec,
    config: &OptimizationConfig,
    start: ControlVector,
    observer: &mut Observer<'_>,
) -> Result<OptimizationResult> {
    config.validate()?;
    if start.num_center() != block.center().len() {
        return Err(Error::DimensionMismatch { expected: block.center().len(), actual: start.num_center() });
    }
    let evaluator = CornerEvaluator::new(block, target, hypercube_corners(block, spec)?)?.with_mode(config.gradient_mode);
    run(&evaluator, config, start, 0, observer)
}

fn run(
    evaluator: &CornerEvaluator,
    config: &OptimizationConfig,
    start: ControlVector,
    restart: usize,
    observer: &mut Observer<'_>,
) -> Result<OptimizationResult> {
    match config.algorithm {
        Algorithm::ScpMinimax => run_scp(evaluator, config, start, restart, observer),
        Algorithm::AvgQuasiNewton => run_avg(evaluator, config, start, restart, observer),
    }
}

/// Worst-case (max-min) optimization by sequential linear programming in
/// a trust region.
pub fn optimize_scp(
    block: &Block,
    target: &TargetGate,
    spec: &UncertaintySpec,
    config: &OptimizationConfig,
) -> Result<OptimizationResult> {
    let config = OptimizationConfig { algorithm: Algorithm::ScpMinimax, ..config.clone() };
    optimize(block, target, spec, &config, &mut |_| true)
}

/// Mean-fidelity maximization by projected L-BFGS.
pub fn optimize_avg(
    block: &Block,
    target: &TargetGate,
    spec: &UncertaintySpec,
    config: &OptimizationConfig,
) -> Result<OptimizationResult> {
    let config = OptimizationConfig { algorithm: Algorithm::AvgQuasiNewton, ..config.clone() };
    optimize(block, target, spec, &config, &mut |_| true)
}

fn clamp_box(controls: &mut ControlVector, bound: f64) {
    for v in controls.values_mut() {
        *v = v.clamp(-bound, bound);
    }
}

fn finish(
    evaluator: &CornerEvaluator,
    controls: ControlVector,
    values: Vec<f64>,
    iterations: usize,
    evaluations: usize,
    trace: Vec<TraceEntry>,
    termination: Termination,
    restart: usize,
) -> OptimizationResult {
    let (worst_case, worst_corner, mean_fidelity) = summarize(&values);
    OptimizationResult {
        controls,
        corner_masks: evaluator.corners().iter().map(|c| c.mask).collect(),
        per_corner_fidelities: values,
        worst_case,
        worst_corner,
        mean_fidelity,
        iterations,
        evaluations,
        trace,
        termination,
        restart,
    }
}

fn run_scp(
    evaluator: &CornerEvaluator,
    config: &OptimizationConfig,
    mut x: ControlVector,
    restart: usize,
    observer: &mut Observer<'_>,
) -> Result<OptimizationResult> {
    clamp_box(&mut x, config.omega_max);
    let (mut values, mut grads) = evaluator.fidelities_and_gradients(&x)?;
    let mut evaluations = 1;
    let (mut f_min, _, mut f_mean) = summarize(&values);
    let mut trace = vec![TraceEntry { iteration: 0, f_min, f_mean }];
    let mut u = config.trust_region_init;
    let bound = config.omega_max;
    let mut iteration = 0;
    let termination = loop {
        if reached(config, f_min) {
            break Termination::TargetReached;
        }
        if iteration >= config.max_iterations {
            break Termination::MaxIterations;
        }
        if u < config.step_tolerance {
            break Termination::StepTolerance;
        }
        iteration += 1;
        let lower: Vec<f64> = x.values().iter().map(|&c| (-u).max(-bound - c).min(0.0)).collect();
        let upper: Vec<f64> = x.values().iter().map(|&c| u.min(bound - c).max(0.0)).collect();
        let sol = lp::max_min_step(&grads, &lower, &upper)?;
        let mut accepted = false;
        if sol.t > 0.0 {
            let mut trial = x.clone();
            for (v, d) in trial.values_mut().iter_mut().zip(&sol.step) {
                *v += d;
            }
            clamp_box(&mut trial, bound);
            let trial_values = evaluator.fidelities(&trial)?;
            evaluations += 1;
            let (trial_min, _, _) = summarize(&trial_values);
            if trial_min > f_min {
                let (v, g) = evaluator.fidelities_and_gradients(&trial)?;
                values = v;
                grads = g;
                x = trial;
                (f_min, _, f_mean) = summarize(&values);
                accepted = true;
            }
        }
        if accepted {
            u *= config.growth;
            trace.push(TraceEntry { iteration, f_min, f_mean });
        } else {
            u /= config.shrink;
        }
        let keep_going = observer(&Progress { restart, iteration, evaluations, f_min, f_mean, trust_region: u, controls: &x });
        if !keep_going {
            break Termination::Stopped;
        }
    };
    Ok(finish(evaluator, x, values, iteration, evaluations, trace, termination, restart))
}

fn run_avg(
    evaluator: &CornerEvaluator,
    config: &OptimizationConfig,
    start: ControlVector,
    restart: usize,
    observer: &mut Observer<'_>,
) -> Result<OptimizationResult> {
    let template = start.clone();
    let n_corners = evaluator.corners().len() as f64;
    // fidelities of the most recent evaluation, shared by both callbacks
    let last = RefCell::new((Vec::new(), 0usize));
    let as_controls = |x: &[f64]| {
        ControlVector::from_values(template.duration(), template.num_bins(), template.num_center(), x.to_vec())
    };
    let opts = LbfgsOptions {
        bound: config.omega_max,
        max_evaluations: config.max_evaluations,
        gradient_tolerance: 1e-13,
        initial_step: config.trust_region_init,
    };
    let mut trace = Vec::new();
    let mut best_seen: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut target_hit = false;
    let outcome = lbfgs::minimize(
        start.values(),
        &opts,
        |x, grad| {
            let cv = as_controls(x)?;
            let (values, grads) = evaluator.fidelities_and_gradients(&cv)?;
            grad.fill(0.0);
            for g in &grads {
                for (a, b) in grad.iter_mut().zip(g) {
                    *a -= b / n_corners;
                }
            }
            let mean = values.iter().sum::<f64>() / n_corners;
            let mut l = last.borrow_mut();
            l.0 = values;
            l.1 += 1;
            Ok(1.0 - mean)
        },
        |iteration, x, _| {
            let l = last.borrow();
            let (f_min, _, f_mean) = summarize(&l.0);
            trace.push(TraceEntry { iteration, f_min, f_mean });
            if best_seen.as_ref().is_none_or(|(_, v)| summarize(v).0 < f_min) {
                best_seen = Some((x.to_vec(), l.0.clone()));
            }
            let cv = as_controls(x).expect("shape preserved");
            let keep = observer(&Progress {
                restart,
                iteration,
                evaluations: l.1,
                f_min,
                f_mean,
                trust_region: 0.0,
                controls: &cv,
            });
            target_hit = reached(config, f_min);
            keep && !target_hit
        },
    )?;
    let termination = match outcome.stop {
        LbfgsStop::MaxEvaluations => Termination::MaxEvaluations,
        LbfgsStop::GradientTolerance => Termination::GradientTolerance,
        LbfgsStop::LineSearchFailed => Termination::LineSearchFailed,
        LbfgsStop::Requested if target_hit => Termination::TargetReached,
        LbfgsStop::Requested => Termination::Stopped,
    };
    let controls = as_controls(&outcome.x)?;
    let values = evaluator.fidelities(&controls)?;
    let evaluations = last.borrow().1 + 1;
    Ok(finish(evaluator, controls, values, outcome.iterations, evaluations, trace, termination, restart))
}

/// Coherence-limited fidelity `1 − N′T/T₂`, clamped at zero.
pub fn coherence_bound(duration: f64, t2: f64, block_size: usize) -> Result<f64> {
    if !(t2 > 0.0) {
        return Err(Error::InvalidConfig(format!("T2 must be positive, got {t2}")));
    }
    Ok((1.0 - block_size as f64 * duration / t2).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{canonical_block, BlockKind};

    #[test]
    fn corner_counts() {
        let single = canonical_block(BlockKind::HoneycombSingle, 1.0).unwrap();
        let pair = canonical_block(BlockKind::HoneycombPair, 1.0).unwrap();
        let spec = UncertaintySpec::new(0.01, 0.01, 0.001);
        assert_eq!(hypercube_corners(&single, &spec).unwrap().len(), 32);
        assert_eq!(hypercube_corners(&pair, &spec).unwrap().len(), 512);
        let nominal = hypercube_corners(&pair, &UncertaintySpec::none()).unwrap();
        assert_eq!(nominal.len(), 1);
        assert_eq!(nominal[0].point, ParameterPoint::nominal(&pair));
    }

    #[test]
    fn corner_order_is_binary_counting() {
        let b = Block::star(&[1.0]).unwrap();
        let c = hypercube_corners(&b, &UncertaintySpec::new(0.2, 0.0, 0.0)).unwrap();
        assert_eq!(c.len(), 2);
        assert!((c[0].point.couplings[0] - 0.9).abs() < 1e-15 && c[0].mask == 0);
        assert!((c[1].point.couplings[0] - 1.1).abs() < 1e-15 && c[1].mask == 1);
        let c = hypercube_corners(&b, &UncertaintySpec::new(0.2, 0.0, 0.4)).unwrap();
        // parameters: J (bit 0), α (bit 1, not uncertain), δ (bit 2)
        let masks: Vec<u64> = c.iter().map(|c| c.mask).collect();
        assert_eq!(masks, vec![0b000, 0b001, 0b100, 0b101]);
        assert!((c[2].point.detunings[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn coherence_examples() {
        assert_eq!(coherence_bound(0.0, 10.0, 4).unwrap(), 1.0);
        assert!((coherence_bound(1.0, 400.0, 4).unwrap() - 0.99).abs() < 1e-15);
        assert_eq!(coherence_bound(2.0, 12.0, 6).unwrap(), 0.0);
        assert!(coherence_bound(1.0, 0.0, 4).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(OptimizationConfig::default().validate().is_ok());
        let bad = OptimizationConfig { omega_max: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OptimizationConfig { growth: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
