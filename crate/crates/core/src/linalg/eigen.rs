use alloc::vec;
use alloc::vec::Vec;

use super::{identity_into, C64, DenseMatrix};

const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition `A = V diag(values) V†` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are the orthonormal eigenvectors.
    pub vectors: DenseMatrix,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> DenseMatrix {
        let diag: Vec<C64> = self.values.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.vectors.matmul(&DenseMatrix::from_diagonal(&diag)).matmul(&self.vectors.adjoint())
    }
}

/// Cyclic complex Jacobi eigensolver. Only the Hermitian part of `a` is used.
pub fn hermitian_eigen(a: &DenseMatrix) -> HermitianEigen {
    assert!(a.is_square(), "eigen-decomposition needs a square matrix");
    let n = a.rows();
    let mut work = a.as_slice().to_vec();
    let mut vecs = vec![C64::new(0.0, 0.0); n * n];
    let mut values = vec![0.0; n];
    jacobi_eigen_in_place(&mut work, &mut vecs, &mut values, n);
    HermitianEigen { values, vectors: DenseMatrix::from_row_major(n, n, vecs) }
}

/// In-place variant for hot loops: `a` (row-major, side `n`) is destroyed,
/// `vecs` receives eigenvectors as columns and `values` the eigenvalues.
pub fn jacobi_eigen_in_place(a: &mut [C64], vecs: &mut [C64], values: &mut [f64], n: usize) {
    identity_into(vecs, n);
    if n == 1 {
        values[0] = a[0].re;
        return;
    }
    let scale = a[..n * n].iter().fold(0.0f64, |m, x| m.max(x.norm()));
    let threshold = (f64::EPSILON * scale) * (f64::EPSILON * scale);
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q].norm_sqr();
            }
        }
        if off <= threshold || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(a, vecs, n, p, q);
            }
        }
    }
    for (i, v) in values.iter_mut().enumerate().take(n) {
        *v = a[i * n + i].re;
    }
}

/// Annihilates `a[p][q]` with a unitary plane rotation `G`, updating
/// `a ← G† a G` and `vecs ← vecs G`.
#[inline]
fn rotate(a: &mut [C64], vecs: &mut [C64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let phase = apq / mag; // e^{iφ}
    let app = a[p * n + p].re;
    let aqq = a[q * n + q].re;
    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta >= 0.0 {
        1.0 / (theta + libm::sqrt(theta * theta + 1.0))
    } else {
        -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
    };
    let c = 1.0 / libm::sqrt(t * t + 1.0);
    let s = t * c;
    let ph_conj = phase.conj();
    // G restricted to (p, q): [[c, s], [-s e^{-iφ}, c e^{-iφ}]]
    let g_qp = -ph_conj * s;
    let g_qq = ph_conj * c;
    for r in 0..n {
        let xp = a[r * n + p];
        let xq = a[r * n + q];
        a[r * n + p] = xp * c + xq * g_qp;
        a[r * n + q] = xp * s + xq * g_qq;
        let vp = vecs[r * n + p];
        let vq = vecs[r * n + q];
        vecs[r * n + p] = vp * c + vq * g_qp;
        vecs[r * n + q] = vp * s + vq * g_qq;
    }
    let gc_qp = g_qp.conj();
    let gc_qq = g_qq.conj();
    for col in 0..n {
        let xp = a[p * n + col];
        let xq = a[q * n + col];
        a[p * n + col] = xp * c + xq * gc_qp;
        a[q * n + col] = xp * s + xq * gc_qq;
    }
    a[p * n + q] = C64::new(0.0, 0.0);
    a[q * n + p] = C64::new(0.0, 0.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(n, n);
        for r in 0..n {
            m[(r, r)] = C64::new(rng.gen_range(-3.0..3.0), 0.0);
            for c in r + 1..n {
                let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m[(r, c)] = z;
                m[(c, r)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn reconstructs_random_hermitian_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 3, 4, 8, 17, 32] {
            let h = random_hermitian(n, &mut rng);
            let e = hermitian_eigen(&h);
            assert!(e.reconstruct().max_abs_diff(&h) < 1e-12, "n = {n}");
            assert!(e.vectors.unitarity_error() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn degenerate_spectrum() {
        let h = DenseMatrix::identity(4).scale(C64::new(2.5, 0.0));
        let e = hermitian_eigen(&h);
        assert!(e.values.iter().all(|v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn pauli_y_eigenvalues() {
        let y = DenseMatrix::from_row_major(
            2,
            2,
            vec![C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
        );
        let mut vals = hermitian_eigen(&y).values;
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((vals[0] + 1.0).abs() < 1e-15 && (vals[1] - 1.0).abs() < 1e-15);
    }
}
