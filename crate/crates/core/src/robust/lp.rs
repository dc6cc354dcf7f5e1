//! The trust-region subproblem
//!
//! ```text
//! maximize t  subject to  g_i · d ≥ t  for every corner i,  l ≤ d ≤ h
//! ```
//!
//! solved with a dense bounded-variable primal simplex. Rows are the
//! corners; columns are `d`, `t` and one slack per row.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-12;
/// After this many consecutive degenerate pivots Bland's rule is used.
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub step: Vec<f64>,
    /// Guaranteed first-order increment `min_i g_i · step`.
    pub t: f64,
    pub pivots: usize,
}

/// Solves the max-min step problem for gradients `g` (one row per corner)
/// and box `lower ≤ d ≤ upper` (with `lower ≤ 0 ≤ upper`).
pub fn max_min_step(g: &[Vec<f64>], lower: &[f64], upper: &[f64]) -> Result<LpSolution> {
    let m = g.len();
    let n = lower.len();
    if m == 0 {
        return Err(Error::LinearProgram("no constraints".into()));
    }
    if upper.len() != n || g.iter().any(|r| r.len() != n) {
        return Err(Error::LinearProgram("inconsistent dimensions".into()));
    }
    if lower.iter().zip(upper).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
        return Err(Error::LinearProgram("invalid variable bounds".into()));
    }
    // Scale the gradients so the largest entry is one; t scales alike.
    let scale = g.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Ok(LpSolution { step: vec![0.0; n], t: 0.0, pivots: 0 });
    }
    let gs: Vec<Vec<f64>> = g.iter().map(|r| r.iter().map(|v| v / scale).collect()).collect();

    let t_lo = gs.iter().map(|r| dot(r, lower)).fold(f64::INFINITY, f64::min);
    let t_hi = gs
        .iter()
        .map(|r| r.iter().zip(lower.iter().zip(upper)).map(|(gk, (l, h))| (gk * l).max(gk * h)).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let t_hi = t_hi.max(t_lo);

    // Columns: 0..n → d, n → t, n+1.. → slacks. Row i: t − g_i·d + s_i = 0.
    let cols = n + 1 + m;
    let mut lb = Vec::with_capacity(cols);
    let mut ub = Vec::with_capacity(cols);
    lb.extend_from_slice(lower);
    ub.extend_from_slice(upper);
    lb.push(t_lo);
    ub.push(t_hi);
    lb.extend(core::iter::repeat_n(0.0, m));
    ub.extend(core::iter::repeat_n(f64::INFINITY, m));

    let mut tab = vec![0.0; m * cols];
    for i in 0..m {
        let row = &mut tab[i * cols..(i + 1) * cols];
        for k in 0..n {
            row[k] = -gs[i][k];
        }
        row[n] = 1.0;
        row[n + 1 + i] = 1.0;
    }
    let mut cost = vec![0.0; cols];
    cost[n] = 1.0;
    // reduced costs r_j = c_j − c_B B⁻¹ A_j; slacks start basic with zero cost
    let mut reduced = cost.clone();
    let mut basis: Vec<usize> = (n + 1..cols).collect();
    let mut is_basic = vec![false; cols];
    for &b in &basis {
        is_basic[b] = true;
    }
    let mut x = vec![0.0; cols];
    x[..n].copy_from_slice(lower);
    x[n] = t_lo;
    for i in 0..m {
        x[n + 1 + i] = dot(&gs[i], lower) - t_lo;
    }

    let max_pivots = 50 * (m + cols);
    let mut pivots = 0;
    let mut degenerate = 0;
    loop {
        if pivots > max_pivots {
            return Err(Error::LinearProgram(format!("no convergence after {pivots} pivots")));
        }
        let bland = degenerate > DEGENERATE_LIMIT;
        let mut entering = None;
        let mut best = 0.0;
        for j in 0..cols {
            if is_basic[j] {
                continue;
            }
            let r = reduced[j];
            let can_increase = r > COST_TOL && x[j] < ub[j];
            let can_decrease = r < -COST_TOL && x[j] > lb[j];
            if can_increase || can_decrease {
                if bland {
                    entering = Some(j);
                    break;
                }
                if r.abs() > best {
                    best = r.abs();
                    entering = Some(j);
                }
            }
        }
        let Some(j) = entering else { break };
        let dir = if reduced[j] > 0.0 { 1.0 } else { -1.0 };

        // ratio test; basic x_B moves by −θ·dir·T[:, j]
        let mut theta = ub[j] - lb[j];
        let mut leave: Option<(usize, bool)> = None;
        for i in 0..m {
            let a = dir * tab[i * cols + j];
            let b = basis[i];
            if a > PIVOT_TOL {
                let lim = (x[b] - lb[b]).max(0.0) / a;
                if lim < theta || (bland && lim == theta && leave.is_some_and(|(r, _)| basis[r] > b)) {
                    theta = lim;
                    leave = Some((i, false));
                }
            } else if a < -PIVOT_TOL && ub[b].is_finite() {
                let lim = (ub[b] - x[b]).max(0.0) / -a;
                if lim < theta || (bland && lim == theta && leave.is_some_and(|(r, _)| basis[r] > b)) {
                    theta = lim;
                    leave = Some((i, true));
                }
            }
        }
        if !theta.is_finite() {
            return Err(Error::LinearProgram("unbounded subproblem".into()));
        }
        degenerate = if theta <= 1e-15 { degenerate + 1 } else { 0 };
        x[j] += dir * theta;
        for i in 0..m {
            let b = basis[i];
            x[b] -= dir * theta * tab[i * cols + j];
        }
        pivots += 1;
        match leave {
            None => {
                // bound flip
                x[j] = if dir > 0.0 { ub[j] } else { lb[j] };
            }
            Some((r, to_upper)) => {
                let out = basis[r];
                x[out] = if to_upper { ub[out] } else { lb[out] };
                let piv = tab[r * cols + j];
                for v in &mut tab[r * cols..(r + 1) * cols] {
                    *v /= piv;
                }
                let pivot_row: Vec<f64> = tab[r * cols..(r + 1) * cols].to_vec();
                for i in 0..m {
                    if i == r {
                        continue;
                    }
                    let f = tab[i * cols + j];
                    if f != 0.0 {
                        for (v, p) in tab[i * cols..(i + 1) * cols].iter_mut().zip(&pivot_row) {
                            *v -= f * p;
                        }
                    }
                }
                let f = reduced[j];
                for (v, p) in reduced.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                is_basic[out] = false;
                is_basic[j] = true;
                basis[r] = j;
            }
        }
    }

    let mut step: Vec<f64> = x[..n].to_vec();
    for (s, (l, h)) in step.iter_mut().zip(lower.iter().zip(upper)) {
        *s = s.clamp(*l, *h);
    }
    // Report the increment actually guaranteed by the clamped step.
    let t = g.iter().map(|r| dot(r, &step)).fold(f64::INFINITY, f64::min);
    Ok(LpSolution { step, t, pivots })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force for two variables: the optimum of max_d min_i g_i·d over
    /// a box is attained at a vertex of the feasible polytope, so checking
    /// box corners, box-edge/constraint intersections and pairwise
    /// constraint intersections is exhaustive.
    fn brute_force(g: &[Vec<f64>], lower: &[f64], upper: &[f64]) -> f64 {
        let obj = |d: [f64; 2]| g.iter().map(|r| r[0] * d[0] + r[1] * d[1]).fold(f64::INFINITY, f64::min);
        let inside = |d: [f64; 2]| (0..2).all(|k| d[k] >= lower[k] - 1e-12 && d[k] <= upper[k] + 1e-12);
        let mut best = f64::NEG_INFINITY;
        let mut cands = vec![[0.0, 0.0]];
        for &a in &[lower[0], upper[0]] {
            for &b in &[lower[1], upper[1]] {
                cands.push([a, b]);
            }
        }
        for i in 0..g.len() {
            for j in i + 1..g.len() {
                let w = [g[i][0] - g[j][0], g[i][1] - g[j][1]];
                // on the line w·d = 0 through the origin, check its box crossings
                for k in 0..2 {
                    let o = 1 - k;
                    if w[o].abs() > 1e-14 {
                        for &v in &[lower[k], upper[k]] {
                            let mut d = [0.0; 2];
                            d[k] = v;
                            d[o] = -w[k] * v / w[o];
                            cands.push(d);
                        }
                    }
                }
            }
        }
        for c in cands {
            if inside(c) {
                best = best.max(obj(c));
            }
        }
        best
    }

    #[test]
    fn matches_vertex_enumeration_in_two_dimensions() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let m = rng.gen_range(1..6);
            let g: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
            let lower = vec![-rng.gen_range(0.0..1.0), -rng.gen_range(0.0..1.0)];
            let upper = vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let sol = max_min_step(&g, &lower, &upper).unwrap();
            let expect = brute_force(&g, &lower, &upper);
            assert!((sol.t - expect).abs() < 1e-10, "{} vs {expect} for {g:?}", sol.t);
        }
    }

    #[test]
    fn single_gradient_gives_sign_step() {
        let g = vec![vec![0.3, -2.0, 0.0]];
        let sol = max_min_step(&g, &[-1.0; 3], &[1.0; 3]).unwrap();
        assert!((sol.step[0] - 1.0).abs() < 1e-14 && (sol.step[1] + 1.0).abs() < 1e-14);
        assert!((sol.t - 2.3).abs() < 1e-14);
    }

    #[test]
    fn opposing_gradients_give_zero() {
        let g = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let sol = max_min_step(&g, &[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        assert!(sol.t.abs() < 1e-14);
    }
}
