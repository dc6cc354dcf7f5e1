//! Multi-qubit operators and the time-sliced block Hamiltonian
//!
//! ```text
//! H_n = Σ_{j∈C} (α_j/2) [Ω_jn σ_j^x + Ω'_jn σ_j^y] + Σ J_jk σ_j^z σ_k^z
//! ```
//!
//! with quadratures rotated by the detuning at the bin midpoint. Qubit 0 is
//! the most significant bit of every basis index. Bins are numbered from 0,
//! so bin `n` has midpoint `(n + 1/2)·Δt`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::lattice::{Block, QubitGraph};
use crate::linalg::{DenseMatrix, SparseMatrix, C64, ZERO};
use crate::{Error, Result};

/// Operators on at least this many qubits are stored sparse.
pub const SPARSE_THRESHOLD_QUBITS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// A square operator on `num_qubits` qubits, dense or CSR depending on
/// size.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorMatrix {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

impl OperatorMatrix {
    fn from_triplets(num_qubits: usize, triplets: Vec<(usize, usize, C64)>) -> Self {
        let dim = 1usize << num_qubits;
        if num_qubits >= SPARSE_THRESHOLD_QUBITS {
            OperatorMatrix::Sparse(SparseMatrix::from_triplets(dim, triplets))
        } else {
            let mut m = DenseMatrix::zeros(dim, dim);
            for (r, c, v) in triplets {
                m[(r, c)] += v;
            }
            OperatorMatrix::Dense(m)
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            OperatorMatrix::Dense(m) => m.rows(),
            OperatorMatrix::Sparse(m) => m.dim(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            OperatorMatrix::Dense(m) => m.clone(),
            OperatorMatrix::Sparse(m) => m.to_dense(),
        }
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        match self {
            OperatorMatrix::Dense(m) => SparseMatrix::from_dense(m),
            OperatorMatrix::Sparse(m) => m.clone(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        match self {
            OperatorMatrix::Dense(m) => m[(r, c)],
            OperatorMatrix::Sparse(m) => m.get(r, c),
        }
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        match self {
            OperatorMatrix::Dense(m) => m.mul_vec(v),
            OperatorMatrix::Sparse(m) => m.mul_vec(v),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        match (self, other) {
            (OperatorMatrix::Sparse(a), OperatorMatrix::Sparse(b)) => OperatorMatrix::Sparse(a.matmul(b)),
            _ => OperatorMatrix::Dense(self.to_dense().matmul(&other.to_dense())),
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        match (self, other) {
            (OperatorMatrix::Sparse(a), OperatorMatrix::Sparse(b)) => OperatorMatrix::Sparse(a.commutator(b)),
            _ => OperatorMatrix::Dense(self.to_dense().commutator(&other.to_dense())),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            OperatorMatrix::Dense(m) => m.max_abs(),
            OperatorMatrix::Sparse(m) => m.max_abs(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        match (self, other) {
            (OperatorMatrix::Sparse(a), OperatorMatrix::Sparse(b)) => a.max_abs_diff(b),
            _ => self.to_dense().max_abs_diff(&other.to_dense()),
        }
    }

    pub fn hermiticity_error(&self) -> f64 {
        match self {
            OperatorMatrix::Dense(m) => m.hermiticity_error(),
            OperatorMatrix::Sparse(m) => m.hermiticity_error(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        match self {
            OperatorMatrix::Dense(m) => {
                let n = m.rows();
                (0..n).all(|r| (0..n).all(|c| r == c || m[(r, c)] == ZERO))
            }
            OperatorMatrix::Sparse(m) => m.is_diagonal(),
        }
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }
}

/// Bit mask of `qubit` in a register of `num_qubits` (qubit 0 = MSB).
#[inline]
pub fn qubit_mask(num_qubits: usize, qubit: usize) -> usize {
    1 << (num_qubits - 1 - qubit)
}

/// `+1` for `|0⟩`, `−1` for `|1⟩`.
#[inline]
pub fn z_sign(state: usize, mask: usize) -> f64 {
    if state & mask == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `I ⊗ … ⊗ σ^axis ⊗ … ⊗ I` with the Pauli on `index`.
pub fn pauli_on(num_qubits: usize, index: usize, axis: Axis) -> Result<OperatorMatrix> {
    if index >= num_qubits {
        return Err(Error::QubitOutOfRange { index, num_qubits });
    }
    if num_qubits > 16 {
        return Err(Error::TooManyQubits { num_qubits, limit: 16 });
    }
    let m = qubit_mask(num_qubits, index);
    let trip = (0..1usize << num_qubits)
        .map(|s| {
            let zero = s & m == 0;
            match axis {
                Axis::X => (s ^ m, s, C64::new(1.0, 0.0)),
                Axis::Y => (s ^ m, s, if zero { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) }),
                Axis::Z => (s, s, C64::new(z_sign(s, m), 0.0)),
            }
        })
        .collect();
    Ok(OperatorMatrix::from_triplets(num_qubits, trip))
}

/// One realization of the uncertain block parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint {
    /// `J` per block coupling, in the block's coupling order.
    pub couplings: Vec<f64>,
    /// `α_j` per center qubit.
    pub amplitude_scales: Vec<f64>,
    /// `δ_j` per center qubit.
    pub detunings: Vec<f64>,
}

impl ParameterPoint {
    /// Nominal values: the block's couplings, `α = 1`, `δ = 0`.
    pub fn nominal(block: &Block) -> Self {
        let nc = block.center().len();
        Self {
            couplings: block.couplings().iter().map(|c| c.coupling).collect(),
            amplitude_scales: vec![1.0; nc],
            detunings: vec![0.0; nc],
        }
    }

    pub fn validate(&self, block: &Block) -> Result<()> {
        let nc = block.center().len();
        if self.couplings.len() != block.couplings().len() {
            return Err(Error::ParameterMismatch(format!(
                "{} coupling values for {} block couplings",
                self.couplings.len(),
                block.couplings().len()
            )));
        }
        if self.amplitude_scales.len() != nc || self.detunings.len() != nc {
            return Err(Error::ParameterMismatch(format!(
                "amplitude/detuning lengths {}/{} for {nc} center qubits",
                self.amplitude_scales.len(),
                self.detunings.len()
            )));
        }
        let all = self.couplings.iter().chain(&self.amplitude_scales).chain(&self.detunings);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterMismatch("non-finite parameter value".into()));
        }
        if self.amplitude_scales.iter().any(|&a| a <= 0.0) {
            return Err(Error::ParameterMismatch("amplitude scales must be positive".into()));
        }
        Ok(())
    }
}

/// Parameters of a whole array: one value per graph edge and per qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayParameters {
    pub couplings: Vec<f64>,
    pub amplitude_scales: Vec<f64>,
    pub detunings: Vec<f64>,
}

impl ArrayParameters {
    pub fn nominal(graph: &QubitGraph) -> Self {
        let n = graph.num_qubits();
        Self {
            couplings: graph.edges().iter().map(|e| e.coupling).collect(),
            amplitude_scales: vec![1.0; n],
            detunings: vec![0.0; n],
        }
    }

    pub fn validate(&self, graph: &QubitGraph) -> Result<()> {
        let n = graph.num_qubits();
        if self.couplings.len() != graph.edges().len() || self.amplitude_scales.len() != n || self.detunings.len() != n
        {
            return Err(Error::ParameterMismatch("array parameters do not match the graph".into()));
        }
        Ok(())
    }

    /// The parameters seen by `block`, which must come from a decomposition
    /// of the same graph.
    pub fn restrict(&self, block: &Block) -> Result<ParameterPoint> {
        let couplings = block
            .edge_ids()
            .iter()
            .map(|id| {
                id.and_then(|i| self.couplings.get(i).copied())
                    .ok_or_else(|| Error::ParameterMismatch("block was not cut from this graph".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let pick = |v: &[f64]| -> Result<Vec<f64>> {
            block
                .center()
                .iter()
                .map(|&q| v.get(q).copied().ok_or(Error::QubitOutOfRange { index: q, num_qubits: v.len() }))
                .collect()
        };
        Ok(ParameterPoint {
            couplings,
            amplitude_scales: pick(&self.amplitude_scales)?,
            detunings: pick(&self.detunings)?,
        })
    }
}

/// Piecewise-constant envelopes `Ω^μ_jn` on `M` equal bins of total
/// duration `T`. Stored flat at `((j·M) + n)·2 + μ` with `μ = 0` for `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector {
    duration: f64,
    num_bins: usize,
    num_center: usize,
    values: Vec<f64>,
}

impl ControlVector {
    pub fn zeros(duration: f64, num_bins: usize, num_center: usize) -> Result<Self> {
        Self::from_values(duration, num_bins, num_center, vec![0.0; 2 * num_bins * num_center])
    }

    pub fn from_values(duration: f64, num_bins: usize, num_center: usize, values: Vec<f64>) -> Result<Self> {
        if num_bins == 0 || !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::InvalidControls(format!(
                "need M >= 1 and finite T > 0, got M = {num_bins}, T = {duration}"
            )));
        }
        let expected = 2 * num_bins * num_center;
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: values.len() });
        }
        Ok(Self { duration, num_bins, num_center, values })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_center(&self) -> usize {
        self.num_center
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.num_bins as f64
    }

    /// Midpoint of bin `n`.
    pub fn midpoint(&self, n: usize) -> f64 {
        (n as f64 + 0.5) * self.dt()
    }

    #[inline]
    pub fn index(&self, j: usize, n: usize, axis: Axis) -> usize {
        let mu = match axis {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => panic!("controls have x and y quadratures only"),
        };
        (j * self.num_bins + n) * 2 + mu
    }

    pub fn get(&self, j: usize, n: usize, axis: Axis) -> f64 {
        self.values[self.index(j, n, axis)]
    }

    pub fn set(&mut self, j: usize, n: usize, axis: Axis, value: f64) {
        let i = self.index(j, n, axis);
        self.values[i] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFiniteControl(i)),
            None => Ok(()),
        }
    }
}

/// Rotated quadratures `(Ω_jn, Ω'_jn)` at the midpoint of bin `n`.
pub fn envelope_at_bin(controls: &ControlVector, j: usize, n: usize, detuning: f64) -> (f64, f64) {
    let (ox, oy) = (controls.get(j, n, Axis::X), controls.get(j, n, Axis::Y));
    let (s, c) = libm::sincos(detuning * controls.midpoint(n));
    (ox * c + oy * s, oy * c - ox * s)
}

/// Diagonal of `Σ J_jk Z_j Z_k` over the block couplings, in block order.
pub fn drift_diagonal(block: &Block, params: &ParameterPoint) -> Result<Vec<f64>> {
    params.validate(block)?;
    let n = block.num_qubits();
    let masks: Vec<(usize, usize, f64)> = block
        .couplings()
        .iter()
        .zip(&params.couplings)
        .map(|(c, &j)| (qubit_mask(n, c.a), qubit_mask(n, c.b), j))
        .collect();
    Ok((0..1usize << n).map(|s| masks.iter().map(|&(ma, mb, j)| j * z_sign(s, ma) * z_sign(s, mb)).sum()).collect())
}

pub fn drift_operator(block: &Block, params: &ParameterPoint) -> Result<OperatorMatrix> {
    let diag = drift_diagonal(block, params)?;
    let trip = diag.into_iter().enumerate().map(|(s, e)| (s, s, C64::new(e, 0.0))).collect();
    Ok(OperatorMatrix::from_triplets(block.num_qubits(), trip))
}

fn check_bin(controls: &ControlVector, block: &Block, n: usize) -> Result<()> {
    if controls.num_center() != block.center().len() {
        return Err(Error::DimensionMismatch { expected: block.center().len(), actual: controls.num_center() });
    }
    if n >= controls.num_bins() {
        return Err(Error::InvalidControls(format!("bin {n} out of range 0..{}", controls.num_bins())));
    }
    Ok(())
}

/// `(σ^x + i·0)` style off-diagonal triplets of `cx σ^x + cy σ^y` on the
/// qubit with `mask`.
fn drive_triplets(dim: usize, mask: usize, cx: f64, cy: f64, out: &mut Vec<(usize, usize, C64)>) {
    for s in 0..dim {
        let v = if s & mask == 0 { C64::new(cx, cy) } else { C64::new(cx, -cy) };
        out.push((s ^ mask, s, v));
    }
}

/// `H_n` of the block for bin `n`.
pub fn hamiltonian_slice(
    block: &Block,
    controls: &ControlVector,
    params: &ParameterPoint,
    n: usize,
) -> Result<OperatorMatrix> {
    check_bin(controls, block, n)?;
    let nq = block.num_qubits();
    let dim = 1usize << nq;
    let diag = drift_diagonal(block, params)?;
    let mut trip: Vec<(usize, usize, C64)> =
        diag.into_iter().enumerate().map(|(s, e)| (s, s, C64::new(e, 0.0))).collect();
    for j in 0..block.center().len() {
        let (om, omp) = envelope_at_bin(controls, j, n, params.detunings[j]);
        let half = 0.5 * params.amplitude_scales[j];
        drive_triplets(dim, qubit_mask(nq, j), half * om, half * omp, &mut trip);
    }
    Ok(OperatorMatrix::from_triplets(nq, trip))
}

/// `(K^x_jn, K^y_jn) = ∂H_n / ∂Ω^{x,y}_jn` for center qubit `j`.
pub fn control_operator(
    block: &Block,
    controls: &ControlVector,
    params: &ParameterPoint,
    j: usize,
    n: usize,
) -> Result<(OperatorMatrix, OperatorMatrix)> {
    check_bin(controls, block, n)?;
    params.validate(block)?;
    if j >= block.center().len() {
        return Err(Error::QubitOutOfRange { index: j, num_qubits: block.center().len() });
    }
    let nq = block.num_qubits();
    let dim = 1usize << nq;
    let half = 0.5 * params.amplitude_scales[j];
    let (s, c) = libm::sincos(params.detunings[j] * controls.midpoint(n));
    let mask = qubit_mask(nq, j);
    let mut kx = Vec::with_capacity(dim);
    let mut ky = Vec::with_capacity(dim);
    drive_triplets(dim, mask, half * c, -half * s, &mut kx);
    drive_triplets(dim, mask, half * s, half * c, &mut ky);
    Ok((OperatorMatrix::from_triplets(nq, kx), OperatorMatrix::from_triplets(nq, ky)))
}

/// Envelope values of one driven qubit in one bin, already rotated and
/// scaled: the drive term is `cx σ^x + cy σ^y`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DriveTerm {
    pub qubit: usize,
    pub cx: f64,
    pub cy: f64,
}

/// Sparse Hamiltonian on `num_qubits` with the given diagonal and drives.
pub(crate) fn sparse_hamiltonian(num_qubits: usize, diag: &[f64], drives: &[DriveTerm]) -> SparseMatrix {
    let dim = 1usize << num_qubits;
    let mut trip: Vec<(usize, usize, C64)> =
        diag.iter().enumerate().map(|(s, &e)| (s, s, C64::new(e, 0.0))).collect();
    for d in drives {
        drive_triplets(dim, qubit_mask(num_qubits, d.qubit), d.cx, d.cy, &mut trip);
    }
    SparseMatrix::from_triplets(dim, trip)
}

/// Diagonal of `Σ_edges J Z_a Z_b` on the whole graph.
pub fn array_drift_diagonal(graph: &QubitGraph, couplings: &[f64]) -> Vec<f64> {
    let n = graph.num_qubits();
    let masks: Vec<(usize, usize, f64)> = graph
        .edges()
        .iter()
        .zip(couplings)
        .map(|(e, &j)| (qubit_mask(n, e.a), qubit_mask(n, e.b), j))
        .collect();
    (0..1usize << n).map(|s| masks.iter().map(|&(ma, mb, j)| j * z_sign(s, ma) * z_sign(s, mb)).sum()).collect()
}

/// Hamiltonian of `block` for bin `n`, embedded in the graph's full
/// Hilbert space (the block must come from a decomposition of `graph`).
pub fn embedded_block_hamiltonian(
    graph: &QubitGraph,
    block: &Block,
    controls: &ControlVector,
    params: &ArrayParameters,
    n: usize,
) -> Result<SparseMatrix> {
    check_bin(controls, block, n)?;
    let local = params.restrict(block)?;
    let nq = graph.num_qubits();
    let global = block.global_qubits();
    let masks: Vec<(usize, usize, f64)> = block
        .couplings()
        .iter()
        .zip(&local.couplings)
        .map(|(c, &j)| (qubit_mask(nq, global[c.a]), qubit_mask(nq, global[c.b]), j))
        .collect();
    let diag: Vec<f64> = (0..1usize << nq)
        .map(|s| masks.iter().map(|&(ma, mb, j)| j * z_sign(s, ma) * z_sign(s, mb)).sum())
        .collect();
    let drives: Vec<DriveTerm> = (0..block.center().len())
        .map(|j| {
            let (om, omp) = envelope_at_bin(controls, j, n, local.detunings[j]);
            let half = 0.5 * local.amplitude_scales[j];
            DriveTerm { qubit: global[j], cx: half * om, cy: half * omp }
        })
        .collect();
    Ok(sparse_hamiltonian(nq, &diag, &drives))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BlockCoupling;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn single_z() {
        let z = pauli_on(1, 0, Axis::Z).unwrap();
        assert_eq!(z.diagonal(), vec![c(1.0), c(-1.0)]);
    }

    #[test]
    fn x_on_second_qubit_flips_lsb() {
        let x = pauli_on(2, 1, Axis::X).unwrap();
        let out = x.mul_vec(&[c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert_eq!(out, vec![c(0.0), c(1.0), c(0.0), c(0.0)]);
    }

    #[test]
    fn pauli_index_out_of_range() {
        assert!(matches!(pauli_on(2, 2, Axis::X), Err(Error::QubitOutOfRange { .. })));
    }

    #[test]
    fn two_qubit_drift() {
        let b = Block::new(1, 1, vec![BlockCoupling { a: 0, b: 1, coupling: 1.0 }]).unwrap();
        let d = drift_operator(&b, &ParameterPoint::nominal(&b)).unwrap();
        assert_eq!(d.diagonal(), vec![c(1.0), c(-1.0), c(-1.0), c(1.0)]);
    }

    #[test]
    fn envelope_rotation() {
        let mut cv = ControlVector::zeros(1.0, 1, 1).unwrap();
        cv.set(0, 0, Axis::X, 1.0);
        // midpoint 0.5, so δ = π gives a rotation by π/2
        let (om, omp) = envelope_at_bin(&cv, 0, 0, core::f64::consts::PI);
        assert!(om.abs() < 1e-15 && (omp + 1.0).abs() < 1e-15);
        cv.set(0, 0, Axis::Y, 0.3);
        assert_eq!(envelope_at_bin(&cv, 0, 0, 0.0), (1.0, 0.3));
    }

    #[test]
    fn lone_qubit_slice_is_half_rabi() {
        let b = Block::new(1, 0, vec![]).unwrap();
        let mut cv = ControlVector::zeros(1.0, 2, 1).unwrap();
        cv.set(0, 1, Axis::X, 2.4);
        let h = hamiltonian_slice(&b, &cv, &ParameterPoint::nominal(&b), 1).unwrap().to_dense();
        let expect = pauli_on(1, 0, Axis::X).unwrap().to_dense().scale(c(1.2));
        assert!(h.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn control_operators_at_zero_detuning() {
        let b = Block::star(&[1.0, 1.0]).unwrap();
        let cv = ControlVector::zeros(1.0, 3, 1).unwrap();
        let (kx, ky) = control_operator(&b, &cv, &ParameterPoint::nominal(&b), 0, 2).unwrap();
        let x = pauli_on(3, 0, Axis::X).unwrap().to_dense().scale(c(0.5));
        let y = pauli_on(3, 0, Axis::Y).unwrap().to_dense().scale(c(0.5));
        assert!(kx.to_dense().max_abs_diff(&x) < 1e-15);
        assert!(ky.to_dense().max_abs_diff(&y) < 1e-15);
        assert!(kx.trace().norm() < 1e-15 && ky.hermiticity_error() < 1e-15);
    }

    #[test]
    fn large_operators_are_sparse() {
        assert!(matches!(pauli_on(6, 0, Axis::X).unwrap(), OperatorMatrix::Dense(_)));
        assert!(matches!(pauli_on(7, 0, Axis::X).unwrap(), OperatorMatrix::Sparse(_)));
    }

    #[test]
    fn controls_validate_shape() {
        assert!(ControlVector::zeros(1.0, 0, 1).is_err());
        assert!(ControlVector::zeros(0.0, 3, 1).is_err());
        assert!(matches!(
            ControlVector::from_values(1.0, 2, 1, vec![0.0; 3]),
            Err(Error::DimensionMismatch { expected: 4, actual: 3 })
        ));
    }
}
