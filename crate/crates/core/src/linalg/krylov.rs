//! Lanczos approximation of `exp(−i H t) v` for Hermitian sparse `H`.

use alloc::vec;
use alloc::vec::Vec;

use super::{jacobi_eigen_in_place, C64, SparseMatrix, ZERO};

/// Default local error tolerance for [`expm_multiply`].
pub const KRYLOV_TOLERANCE: f64 = 1e-12;

const MAX_KRYLOV_DIM: usize = 30;

fn norm(v: &[C64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x.norm_sqr()).sum::<f64>())
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

/// Returns `exp(−i H t) v`, with `H` assumed Hermitian. Substeps are
/// shrunk until the a-posteriori Lanczos error estimate of each substep is
/// below `tol · τ / t`, so the accumulated error stays below `tol · ‖v‖`.
pub fn expm_multiply(h: &SparseMatrix, t: f64, v: &[C64], tol: f64) -> Vec<C64> {
    let n = h.dim();
    assert_eq!(v.len(), n, "vector length does not match operator");
    if t == 0.0 || v.iter().all(|x| *x == ZERO) {
        return v.to_vec();
    }
    if h.is_diagonal() {
        return h
            .diagonal()
            .iter()
            .zip(v)
            .map(|(d, x)| (C64::new(0.0, -t) * d).exp() * x)
            .collect();
    }
    let total = libm::fabs(t);
    let sign = if t < 0.0 { -1.0 } else { 1.0 };
    let hnorm = h.norm_inf().max(f64::MIN_POSITIVE);
    let mut w = v.to_vec();
    let mut elapsed = 0.0;
    let mut tau = total.min(10.0 / hnorm);
    let m_max = MAX_KRYLOV_DIM.min(n);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m_max + 1);
    let mut scratch = vec![ZERO; n];

    while elapsed < total {
        let beta = norm(&w);
        if beta == 0.0 {
            break;
        }
        basis.clear();
        basis.push(w.iter().map(|x| x / beta).collect());
        let mut alpha = Vec::with_capacity(m_max);
        let mut offdiag = Vec::with_capacity(m_max);
        let mut happy = false;
        for j in 0..m_max {
            h.mul_vec_into(&basis[j], &mut scratch);
            let a = dot(&basis[j], &scratch).re;
            // full reorthogonalisation, twice
            for _ in 0..2 {
                for b in basis.iter() {
                    let c = dot(b, &scratch);
                    for (s, x) in scratch.iter_mut().zip(b) {
                        *s -= c * x;
                    }
                }
            }
            alpha.push(a);
            let b = norm(&scratch);
            offdiag.push(b);
            if b <= 1e-13 * hnorm {
                happy = true;
                break;
            }
            basis.push(scratch.iter().map(|x| x / b).collect());
        }
        let m = alpha.len();
        let beta_next = if happy { 0.0 } else { offdiag[m - 1] };

        let mut tri = vec![ZERO; m * m];
        for i in 0..m {
            tri[i * m + i] = C64::new(alpha[i], 0.0);
            if i + 1 < m {
                tri[i * m + i + 1] = C64::new(offdiag[i], 0.0);
                tri[(i + 1) * m + i] = C64::new(offdiag[i], 0.0);
            }
        }
        let mut vecs = vec![ZERO; m * m];
        let mut vals = vec![0.0; m];
        jacobi_eigen_in_place(&mut tri, &mut vecs, &mut vals, m);

        let remaining = total - elapsed;
        tau = tau.min(remaining);
        let coeffs = loop {
            // y = S exp(-i Λ τ) S† e1
            let y: Vec<C64> = (0..m)
                .map(|r| {
                    (0..m).fold(ZERO, |acc, k| {
                        acc + vecs[r * m + k]
                            * C64::new(0.0, -sign * vals[k] * tau).exp()
                            * vecs[k].conj()
                    })
                })
                .collect();
            let err = beta * beta_next * y[m - 1].norm();
            if happy || err <= tol * tau / total || tau < 1e-10 * total {
                break y;
            }
            tau *= 0.5;
        };
        for x in w.iter_mut() {
            *x = ZERO;
        }
        for (k, c) in coeffs.iter().enumerate() {
            let scaled = c * beta;
            for (x, b) in w.iter_mut().zip(&basis[k]) {
                *x += scaled * b;
            }
        }
        elapsed += tau;
        if (total - elapsed) < 1e-15 * total {
            break;
        }
        // let the step grow back when the estimate had headroom
        tau *= 1.5;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm;

    fn ring_hamiltonian(n: usize) -> SparseMatrix {
        let mut trip = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            trip.push((i, j, C64::new(0.7, 0.2)));
            trip.push((j, i, C64::new(0.7, -0.2)));
            trip.push((i, i, C64::new((i % 5) as f64 - 2.0, 0.0)));
        }
        SparseMatrix::from_triplets(n, trip)
    }

    #[test]
    fn matches_dense_exponential() {
        let n = 64;
        let h = ring_hamiltonian(n);
        let v: Vec<C64> = (0..n).map(|i| C64::new(1.0 / (i + 1) as f64, (i % 3) as f64 * 0.1)).collect();
        for t in [0.05, 1.0, 7.5] {
            let krylov = expm_multiply(&h, t, &v, KRYLOV_TOLERANCE);
            let dense = expm(&h.to_dense().scale(C64::new(0.0, -t)));
            let exact = dense.mul_vec(&v);
            let err = krylov.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
            assert!(err < 1e-10, "t = {t}, err = {err}");
        }
    }

    #[test]
    fn diagonal_fast_path_is_exact() {
        let h = SparseMatrix::from_diagonal(&[C64::new(1.0, 0.0), C64::new(-2.0, 0.0)]);
        let out = expm_multiply(&h, 0.5, &[C64::new(1.0, 0.0), C64::new(0.0, 1.0)], 1e-12);
        assert!((out[0] - C64::new(0.0, -0.5).exp()).norm() < 1e-15);
        assert!((out[1] - C64::new(0.0, 1.0) * C64::new(0.0, 1.0).exp()).norm() < 1e-15);
    }
}
