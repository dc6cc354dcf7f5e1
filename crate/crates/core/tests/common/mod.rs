#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zzarray_core::hamiltonian::{ControlVector, ParameterPoint};
use zzarray_core::lattice::{build_honeycomb, Block, CouplingAssignment, QubitGraph};
use zzarray_core::propagation::{BlockPropagator, TargetGate, Workspace};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_controls(rng: &mut ChaCha8Rng, duration: f64, m: usize, nc: usize, amp: f64) -> ControlVector {
    let v = (0..2 * m * nc).map(|_| rng.gen_range(-amp..amp)).collect();
    ControlVector::from_values(duration, m, nc, v).unwrap()
}

/// Couplings within ±20 %, amplitudes within ±10 %, detunings within ±0.1.
pub fn random_point(rng: &mut ChaCha8Rng, block: &Block) -> ParameterPoint {
    let mut p = ParameterPoint::nominal(block);
    p.couplings.iter_mut().for_each(|j| *j *= rng.gen_range(0.8..1.2));
    p.amplitude_scales.iter_mut().for_each(|a| *a = rng.gen_range(0.9..1.1));
    p.detunings.iter_mut().for_each(|d| *d = rng.gen_range(-0.1..0.1));
    p
}

/// Largest deviation between the analytic gradient and central finite
/// differences, relative to the largest gradient component.
pub fn gradient_relative_error(
    block: &Block,
    target: &TargetGate,
    controls: &ControlVector,
    params: &ParameterPoint,
    step: f64,
) -> f64 {
    let prop = BlockPropagator::new(block, target).unwrap();
    let mut ws = Workspace::default();
    let mut grad = vec![0.0; controls.len()];
    prop.evaluate(controls, params, Some(&mut grad), &mut ws).unwrap();
    let mut worst = 0.0f64;
    for k in 0..controls.len() {
        let mut plus = controls.clone();
        plus.values_mut()[k] += step;
        let mut minus = controls.clone();
        minus.values_mut()[k] -= step;
        let fp = prop.evaluate(&plus, params, None, &mut ws).unwrap();
        let fm = prop.evaluate(&minus, params, None, &mut ws).unwrap();
        worst = worst.max(((fp - fm) / (2.0 * step) - grad[k]).abs());
    }
    let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    worst / scale
}

/// Eight-qubit honeycomb fragment: two hexagons sharing a rung, minus the
/// two right-most vertices. Returns the graph and the rung qubits `(A, B)`
/// at coordinates (0, 2) and (1, 2).
pub fn honeycomb_fragment() -> (QubitGraph, usize, usize) {
    let full = build_honeycomb(1, 2, &CouplingAssignment::Uniform(1.0)).unwrap();
    let coords = full.coords().unwrap().to_vec();
    let keep: Vec<usize> = (0..full.num_qubits()).filter(|&q| coords[q] != (0, 4) && coords[q] != (1, 4)).collect();
    let g = full.induced_subgraph(&keep).unwrap();
    let c = g.coords().unwrap();
    let a = c.iter().position(|&x| x == (0, 2)).unwrap();
    let b = c.iter().position(|&x| x == (1, 2)).unwrap();
    (g, a, b)
}
