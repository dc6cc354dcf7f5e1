use alloc::vec;
use alloc::vec::Vec;

use super::{C64, DenseMatrix, ZERO};

/// Compressed-sparse-row complex matrix (square).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![C64::new(1.0, 0.0); dim])
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let dim = diag.len();
        Self { dim, row_ptr: (0..=dim).collect(), col_idx: (0..dim).collect(), values: diag.to_vec() }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet index out of range");
            if let (Some(&lr), Some(&lc)) = (rows.last(), col_idx.last()) {
                if lr == r && lc == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            col_idx.push(c);
            values.push(v);
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != ZERO {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { dim, row_ptr, col_idx: keep_cols, values: keep_vals }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        assert!(m.is_square());
        let n = m.rows();
        let mut trip = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let v = m[(r, c)];
                if v != ZERO {
                    trip.push((r, c, v));
                }
            }
        }
        Self::from_triplets(n, trip)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(ZERO, |(_, v)| v)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        self.mul_vec_into(v, &mut out);
        out
    }

    pub fn mul_vec_into(&self, v: &[C64], out: &mut [C64]) {
        assert_eq!(v.len(), self.dim);
        for (r, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = self.row(r).fold(ZERO, |acc, (c, x)| acc + x * v[c]);
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut trip = Vec::new();
        let mut acc = vec![ZERO; self.dim];
        let mut touched = Vec::new();
        let mut mark = vec![false; self.dim];
        for r in 0..self.dim {
            for (k, x) in self.row(r) {
                for (c, y) in other.row(k) {
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += x * y;
                }
            }
            for &c in &touched {
                trip.push((r, c, acc[c]));
                acc[c] = ZERO;
                mark[c] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.dim, trip)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.linear_combination(C64::new(1.0, 0.0), other, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.linear_combination(C64::new(1.0, 0.0), other, C64::new(-1.0, 0.0))
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: C64, other: &Self, b: C64) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let trip = self
            .triplets()
            .map(|(r, c, v)| (r, c, v * a))
            .chain(other.triplets().map(|(r, c, v)| (r, c, v * b)))
            .collect();
        Self::from_triplets(self.dim, trip)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect())
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// Upper bound on the spectral norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim).map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_cancellations_dropped() {
        let one = C64::new(1.0, 0.0);
        let m = SparseMatrix::from_triplets(2, vec![(0, 1, one), (0, 1, one), (1, 0, one), (1, 0, -one)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), C64::new(2.0, 0.0));
    }

    #[test]
    fn sparse_product_matches_dense() {
        let a = DenseMatrix::from_fn(5, 5, |r, c| {
            if (r + 2 * c) % 3 == 0 { C64::new(r as f64 - c as f64, 0.5) } else { ZERO }
        });
        let b = DenseMatrix::from_fn(5, 5, |r, c| if (r * c) % 2 == 1 { C64::new(1.0, -1.0) } else { ZERO });
        let sp = SparseMatrix::from_dense(&a).matmul(&SparseMatrix::from_dense(&b));
        assert!(sp.to_dense().max_abs_diff(&a.matmul(&b)) < 1e-15);
    }
}
