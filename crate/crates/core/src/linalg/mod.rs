//! Small complex linear algebra: dense and CSR matrices, the Hermitian
//! eigensolver, dense Padé exponentials and Krylov exponential actions.
//!
//! Everything here is sized for few-qubit blocks (dense, up to a few hundred
//! rows) and for the whole-array oracles (sparse, up to 2^12 rows).

mod dense;
mod eigen;
mod expm;
mod krylov;
mod sparse;

pub use dense::DenseMatrix;
pub use eigen::{hermitian_eigen, jacobi_eigen_in_place, HermitianEigen};
pub use expm::expm;
pub use krylov::{expm_multiply, KRYLOV_TOLERANCE};
pub use sparse::SparseMatrix;

pub use num_complex::Complex64 as C64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// `out = a * b` for row-major square matrices of side `d`.
#[inline]
pub(crate) fn mat_mul(a: &[C64], b: &[C64], out: &mut [C64], d: usize) {
    for r in 0..d {
        let row = &mut out[r * d..(r + 1) * d];
        row.fill(ZERO);
        for k in 0..d {
            let x = a[r * d + k];
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            let brow = &b[k * d..(k + 1) * d];
            for (o, y) in row.iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
}

/// `out = a† * b`.
#[inline]
pub(crate) fn mat_mul_adj_left(a: &[C64], b: &[C64], out: &mut [C64], d: usize) {
    out[..d * d].fill(ZERO);
    for k in 0..d {
        let arow = &a[k * d..(k + 1) * d];
        let brow = &b[k * d..(k + 1) * d];
        for r in 0..d {
            let x = arow[r].conj();
            let row = &mut out[r * d..(r + 1) * d];
            for (o, y) in row.iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
}

/// `out = a * b†`.
#[inline]
pub(crate) fn mat_mul_adj_right(a: &[C64], b: &[C64], out: &mut [C64], d: usize) {
    for r in 0..d {
        let arow = &a[r * d..(r + 1) * d];
        for c in 0..d {
            let brow = &b[c * d..(c + 1) * d];
            let mut acc = ZERO;
            for (x, y) in arow.iter().zip(brow) {
                acc += x * y.conj();
            }
            out[r * d + c] = acc;
        }
    }
}

/// `tr(a† b)` for flat matrices of equal length.
#[inline]
pub(crate) fn trace_adj_product(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

pub(crate) fn identity_into(out: &mut [C64], d: usize) {
    out[..d * d].fill(ZERO);
    for i in 0..d {
        out[i * d + i] = ONE;
    }
}
