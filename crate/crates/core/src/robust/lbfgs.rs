//! Projected L-BFGS for box-constrained minimization.
//!
//! Variables sitting on a bound whose gradient pushes outward are frozen
//! for the iteration; the two-loop recursion runs on the remaining free
//! variables and the step is projected back onto the box during an Armijo
//! backtracking search. Every iterate is feasible and accepted iterates
//! never increase the objective.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::Result;

const MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub bound: f64,
    pub max_evaluations: usize,
    /// Stop once the projected gradient's max-norm falls below this.
    pub gradient_tolerance: f64,
    /// Largest coordinate change of the first (steepest-descent) step.
    pub initial_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfgsStop {
    MaxEvaluations,
    GradientTolerance,
    LineSearchFailed,
    /// The callback asked to stop.
    Requested,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: LbfgsStop,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn frozen(x: &[f64], g: &[f64], bound: f64) -> Vec<bool> {
    x.iter().zip(g).map(|(&xi, &gi)| (xi <= -bound && gi > 0.0) || (xi >= bound && gi < 0.0)).collect()
}

/// Minimizes `f` over `|x_i| ≤ bound`. `eval(x, grad)` returns `f(x)` and
/// fills `grad`; `on_iteration(iter, x, f)` runs after every accepted step
/// and may return `false` to stop.
pub fn minimize(
    x0: &[f64],
    opts: &LbfgsOptions,
    mut eval: impl FnMut(&[f64], &mut [f64]) -> Result<f64>,
    mut on_iteration: impl FnMut(usize, &[f64], f64) -> bool,
) -> Result<LbfgsOutcome> {
    let n = x0.len();
    let b = opts.bound;
    let mut x: Vec<f64> = x0.iter().map(|v| v.clamp(-b, b)).collect();
    let mut g = vec![0.0; n];
    let mut f = eval(&x, &mut g)?;
    let mut evaluations = 1;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut iterations = 0;
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];

    let stop = loop {
        let fix = frozen(&x, &g, b);
        let pg = g.iter().zip(&fix).fold(0.0f64, |m, (gi, &fz)| if fz { m } else { m.max(gi.abs()) });
        if pg <= opts.gradient_tolerance {
            break LbfgsStop::GradientTolerance;
        }
        if evaluations >= opts.max_evaluations {
            break LbfgsStop::MaxEvaluations;
        }

        // two-loop recursion on the free variables
        let mut q: Vec<f64> = g.iter().zip(&fix).map(|(&gi, &fz)| if fz { 0.0 } else { gi }).collect();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = memory.back().map_or_else(
            || opts.initial_step / pg,
            |(s, y, _)| dot(s, y) / dot(y, y),
        );
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - beta) * si;
            }
        }
        let mut d: Vec<f64> = q.iter().zip(&fix).map(|(&qi, &fz)| if fz { 0.0 } else { -qi }).collect();
        if dot(&d, &g) >= 0.0 {
            memory.clear();
            let scale = opts.initial_step / pg;
            d = g.iter().zip(&fix).map(|(&gi, &fz)| if fz { 0.0 } else { -gi * scale }).collect();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for ((t, xi), di) in trial.iter_mut().zip(&x).zip(&d) {
                *t = (xi + step * di).clamp(-b, b);
            }
            let moved: f64 = trial.iter().zip(&x).zip(&g).map(|((t, xi), gi)| gi * (t - xi)).sum();
            if moved >= 0.0 {
                step *= 0.5;
                continue;
            }
            let ft = eval(&trial, &mut g_trial)?;
            evaluations += 1;
            if ft <= f + ARMIJO * moved {
                accepted = Some(ft);
                break;
            }
            if evaluations >= opts.max_evaluations {
                break;
            }
            step *= 0.5;
        }
        let Some(ft) = accepted else {
            if evaluations >= opts.max_evaluations {
                break LbfgsStop::MaxEvaluations;
            }
            if memory.is_empty() {
                break LbfgsStop::LineSearchFailed;
            }
            memory.clear();
            continue;
        };

        let s: Vec<f64> = trial.iter().zip(&x).map(|(t, xi)| t - xi).collect();
        let y: Vec<f64> = g_trial.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * libm::sqrt(dot(&s, &s) * dot(&y, &y)) {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        x.copy_from_slice(&trial);
        g.copy_from_slice(&g_trial);
        f = ft;
        iterations += 1;
        if !on_iteration(iterations, &x, f) {
            break LbfgsStop::Requested;
        }
    };
    Ok(LbfgsOutcome { x, f, iterations, evaluations, stop })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_unconstrained_region() {
        let opts = LbfgsOptions { bound: 5.0, max_evaluations: 2000, gradient_tolerance: 1e-10, initial_step: 0.1 };
        let out = minimize(
            &[-1.2, 1.0],
            &opts,
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                Ok((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
            },
            |_, _, _| true,
        )
        .unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6, "{:?}", out);
    }

    #[test]
    fn active_bounds_are_respected() {
        // minimum of Σ (x_i − 3)² inside |x| ≤ 1 is at x = 1
        let opts = LbfgsOptions { bound: 1.0, max_evaluations: 200, gradient_tolerance: 1e-12, initial_step: 0.5 };
        let mut last = f64::INFINITY;
        let out = minimize(
            &[0.0, -0.5, 0.9],
            &opts,
            |x, g| {
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi = 2.0 * (xi - 3.0);
                }
                Ok(x.iter().map(|v| (v - 3.0) * (v - 3.0)).sum())
            },
            |_, x, f| {
                assert!(x.iter().all(|v| v.abs() <= 1.0));
                assert!(f <= last);
                last = f;
                true
            },
        )
        .unwrap();
        assert!(out.x.iter().all(|&v| v == 1.0));
        assert_eq!(out.stop, LbfgsStop::GradientTolerance);
    }
}
