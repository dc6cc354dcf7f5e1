//! Piecewise-constant propagation of a block, the trace fidelity
//! `|tr(U†(U_C ⊗ I_B))/D|²` and its gradient with respect to the controls.
//!
//! Boundary qubits are never driven, so their `Z` values are conserved and
//! the block Hamiltonian splits into `2^{N_B}` sectors of size `2^{N_C}`:
//! in sector `b` the drive acts on the center with an extra diagonal
//! `E_b(c)` from the ZZ terms. Each slice is exponentiated exactly through
//! its Hermitian eigen-decomposition, and the gradient uses the exact
//! Fréchet derivative of `exp(−iHΔt)` in that eigenbasis. The
//! second-order expansion `−iΔtK − (Δt²/2)[H, K]` is kept as
//! [`GradientMode::SecondOrder`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::hamiltonian::{
    array_drift_diagonal, drift_diagonal, envelope_at_bin, hamiltonian_slice, qubit_mask, sparse_hamiltonian,
    ArrayParameters, Axis, ControlVector, DriveTerm, OperatorMatrix, ParameterPoint,
};
use crate::lattice::{decompose_blocks, Block, DrivingPattern, QubitGraph};
use crate::linalg::{
    expm, expm_multiply, identity_into, jacobi_eigen_in_place, mat_mul, mat_mul_adj_left, mat_mul_adj_right,
    trace_adj_product, DenseMatrix, C64, KRYLOV_TOLERANCE, ONE, ZERO,
};
use crate::{Error, Result};

/// Largest graph [`evolve_array`] and [`propagate_dense`] accept.
pub const MAX_ARRAY_QUBITS: usize = 12;
/// Dense Padé exponentials are used up to this dimension, Krylov above.
pub const DENSE_EXPM_MAX_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateLabel {
    H,
    T,
    I,
    X,
    Cnot,
    I2,
    Custom,
}

/// A gate on the driven center, as a unitary on its first one or two
/// qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetGate {
    label: GateLabel,
    matrix: DenseMatrix,
}

impl TargetGate {
    fn fixed(label: GateLabel, dim: usize, entries: Vec<C64>) -> Self {
        Self { label, matrix: DenseMatrix::from_row_major(dim, dim, entries) }
    }

    pub fn hadamard() -> Self {
        let s = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::fixed(GateLabel::H, 2, vec![s, s, s, -s])
    }

    /// The π/8 gate `diag(1, e^{iπ/4})`.
    pub fn t_gate() -> Self {
        let p = C64::from_polar(1.0, core::f64::consts::FRAC_PI_4);
        Self::fixed(GateLabel::T, 2, vec![ONE, ZERO, ZERO, p])
    }

    pub fn identity() -> Self {
        Self { label: GateLabel::I, matrix: DenseMatrix::identity(2) }
    }

    pub fn pauli_x() -> Self {
        Self::fixed(GateLabel::X, 2, vec![ZERO, ONE, ONE, ZERO])
    }

    /// Controlled NOT with the first center qubit as control.
    pub fn cnot() -> Self {
        let mut m = DenseMatrix::zeros(4, 4);
        m[(0, 0)] = ONE;
        m[(1, 1)] = ONE;
        m[(2, 3)] = ONE;
        m[(3, 2)] = ONE;
        Self { label: GateLabel::Cnot, matrix: m }
    }

    pub fn identity2() -> Self {
        Self { label: GateLabel::I2, matrix: DenseMatrix::identity(4) }
    }

    /// A custom gate on `log2(dim)` qubits; must be unitary to 1e-14.
    pub fn custom(matrix: DenseMatrix) -> Result<Self> {
        let d = matrix.rows();
        if !matrix.is_square() || d < 2 || !d.is_power_of_two() {
            return Err(Error::InvalidConfig(format!("custom gate must be 2^k square, got {}x{}", d, matrix.cols())));
        }
        let err = matrix.unitarity_error();
        if !(err <= 1e-14) {
            return Err(Error::InvalidConfig(format!("custom gate is not unitary (error {err:.3e})")));
        }
        Ok(Self { label: GateLabel::Custom, matrix })
    }

    /// Parses `H`, `T`, `I`, `X`, `CNOT`/`CX` and `I2`.
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "H" => Some(Self::hadamard()),
            "T" => Some(Self::t_gate()),
            "I" => Some(Self::identity()),
            "X" => Some(Self::pauli_x()),
            "CNOT" | "CX" => Some(Self::cnot()),
            "I2" => Some(Self::identity2()),
            _ => None,
        }
    }

    pub fn label(&self) -> GateLabel {
        self.label
    }

    pub fn name(&self) -> &'static str {
        match self.label {
            GateLabel::H => "H",
            GateLabel::T => "T",
            GateLabel::I => "I",
            GateLabel::X => "X",
            GateLabel::Cnot => "CNOT",
            GateLabel::I2 => "I2",
            GateLabel::Custom => "custom",
        }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn num_qubits(&self) -> usize {
        self.matrix.rows().trailing_zeros() as usize
    }

    /// `U_C` on a center of `num_center` qubits: the gate on the leading
    /// center qubits, identity on the rest.
    pub fn center_matrix(&self, num_center: usize) -> Result<DenseMatrix> {
        let k = self.num_qubits();
        if k > num_center {
            return Err(Error::DimensionMismatch { expected: num_center, actual: k });
        }
        Ok(self.matrix.kron(&DenseMatrix::identity(1 << (num_center - k))))
    }

    /// `U_C ⊗ I_B` on the whole block.
    pub fn block_matrix(&self, block: &Block) -> Result<DenseMatrix> {
        Ok(self.center_matrix(block.center().len())?.kron(&DenseMatrix::identity(1 << block.boundary().len())))
    }
}

/// How the derivative of each slice propagator is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    /// Exact derivative of `exp(−iH_nΔt)` (divided differences in the
    /// eigenbasis of `H_n`).
    #[default]
    Exact,
    /// `{−iΔtK − (Δt²/2)[H_n, K]} U_n`, accurate to `O(Δt³)` per slice.
    SecondOrder,
}

/// Eigen-data and products of one boundary sector.
#[derive(Debug, Clone, Default)]
struct SectorRecord {
    /// `λ` per bin, `dc` each.
    values: Vec<f64>,
    /// Eigenvectors per bin, `dc²` each.
    vectors: Vec<C64>,
    /// `U_n` per bin.
    steps: Vec<C64>,
    /// `U_n ⋯ U_0` per bin.
    forward: Vec<C64>,
}

/// Everything the gradient needs from one propagation: per-bin unitaries,
/// forward products `U^f_n = U_n ⋯ U_0` and backward products
/// `U^b_n = U_{M−1} ⋯ U_n` (`U^b_M = I`), stored per boundary sector.
#[derive(Debug, Clone)]
pub struct PropagationRecord {
    num_center: usize,
    num_boundary: usize,
    num_bins: usize,
    dt: f64,
    /// `H_n` drive part on the center, needed by the second-order mode.
    drives: Vec<C64>,
    energies: Vec<f64>,
    sectors: Vec<SectorRecord>,
    backward: Vec<Vec<C64>>,
}

impl PropagationRecord {
    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        1 << (self.num_center + self.num_boundary)
    }

    fn dc(&self) -> usize {
        1 << self.num_center
    }

    fn assemble<'a>(&'a self, pick: impl Fn(usize) -> &'a [C64]) -> DenseMatrix {
        let (dc, nb) = (self.dc(), self.num_boundary);
        let mut m = DenseMatrix::zeros(self.dim(), self.dim());
        for s in 0..self.sectors.len() {
            let u = pick(s);
            for r in 0..dc {
                for c in 0..dc {
                    m[((r << nb) | s, (c << nb) | s)] = u[r * dc + c];
                }
            }
        }
        m
    }

    /// `U_n` on the full block.
    pub fn step(&self, n: usize) -> DenseMatrix {
        let d2 = self.dc() * self.dc();
        self.assemble(|s| &self.sectors[s].steps[n * d2..(n + 1) * d2])
    }

    /// `U^f_n = U_n ⋯ U_0`.
    pub fn forward(&self, n: usize) -> DenseMatrix {
        let d2 = self.dc() * self.dc();
        self.assemble(|s| &self.sectors[s].forward[n * d2..(n + 1) * d2])
    }

    /// `U^b_n = U_{M−1} ⋯ U_n`, with `U^b_M = I`.
    pub fn backward(&self, n: usize) -> DenseMatrix {
        let d2 = self.dc() * self.dc();
        self.assemble(|s| &self.backward[s][n * d2..(n + 1) * d2])
    }

    pub fn final_unitary(&self) -> DenseMatrix {
        self.forward(self.num_bins - 1)
    }
}

/// Per-block constants shared by every evaluation.
#[derive(Debug, Clone)]
pub struct BlockPropagator {
    block: Block,
    num_center: usize,
    num_boundary: usize,
    /// `U_C` on the center, row-major.
    target: Vec<C64>,
    mode: GradientMode,
}

/// Scratch buffers for [`BlockPropagator::evaluate`], reusable across calls.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    record: SectorRecord,
    drives: Vec<C64>,
    energies: Vec<f64>,
    zsum: Vec<C64>,
    bufs: [Vec<C64>; 5],
    gamma: Vec<C64>,
}

impl BlockPropagator {
    pub fn new(block: &Block, target: &TargetGate) -> Result<Self> {
        let num_center = block.center().len();
        let uc = target.center_matrix(num_center)?;
        Ok(Self {
            block: block.clone(),
            num_center,
            num_boundary: block.boundary().len(),
            target: uc.into_vec(),
            mode: GradientMode::Exact,
        })
    }

    pub fn with_mode(mut self, mode: GradientMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn block(&self) -> &Block {
        &self.block
    }

    pub fn mode(&self) -> GradientMode {
        self.mode
    }

    fn dc(&self) -> usize {
        1 << self.num_center
    }

    fn num_sectors(&self) -> usize {
        1 << self.num_boundary
    }

    fn check(&self, controls: &ControlVector, params: &ParameterPoint) -> Result<()> {
        if controls.num_center() != self.num_center {
            return Err(Error::DimensionMismatch { expected: self.num_center, actual: controls.num_center() });
        }
        controls.check_finite()?;
        params.validate(&self.block)
    }

    /// Fills the per-bin center drive matrices and the block energies.
    fn prepare(&self, controls: &ControlVector, params: &ParameterPoint, drives: &mut Vec<C64>, energies: &mut Vec<f64>) -> Result<()> {
        let (nc, dc, m) = (self.num_center, self.dc(), controls.num_bins());
        drives.clear();
        drives.resize(m * dc * dc, ZERO);
        for n in 0..m {
            let h = &mut drives[n * dc * dc..(n + 1) * dc * dc];
            for j in 0..nc {
                let (om, omp) = envelope_at_bin(controls, j, n, params.detunings[j]);
                let half = 0.5 * params.amplitude_scales[j];
                let (cx, cy) = (half * om, half * omp);
                let mask = qubit_mask(nc, j);
                for c in 0..dc {
                    let v = if c & mask == 0 { C64::new(cx, cy) } else { C64::new(cx, -cy) };
                    h[(c ^ mask) * dc + c] += v;
                }
            }
        }
        *energies = drift_diagonal(&self.block, params)?;
        Ok(())
    }

    /// Forward sweep of sector `s`. Returns `tr(U_C† U^f_{M−1})` of the
    /// sector.
    #[allow(clippy::too_many_arguments)]
    fn forward_sector(
        &self,
        s: usize,
        num_bins: usize,
        dt: f64,
        drives: &[C64],
        energies: &[f64],
        rec: &mut SectorRecord,
        bufs: &mut [Vec<C64>; 5],
    ) -> C64 {
        let (dc, nb) = (self.dc(), self.num_boundary);
        let d2 = dc * dc;
        rec.values.resize(num_bins * dc, 0.0);
        rec.vectors.resize(num_bins * d2, ZERO);
        rec.steps.resize(num_bins * d2, ZERO);
        rec.forward.resize(num_bins * d2, ZERO);
        let [work, tmp, ..] = bufs;
        work.resize(d2, ZERO);
        tmp.resize(d2, ZERO);
        for n in 0..num_bins {
            work.copy_from_slice(&drives[n * d2..(n + 1) * d2]);
            for c in 0..dc {
                work[c * dc + c] += energies[(c << nb) | s];
            }
            let vals = &mut rec.values[n * dc..(n + 1) * dc];
            let vecs = &mut rec.vectors[n * d2..(n + 1) * d2];
            jacobi_eigen_in_place(work, vecs, vals, dc);
            for k in 0..dc {
                let phase = C64::new(0.0, -vals[k] * dt).exp();
                for r in 0..dc {
                    tmp[r * dc + k] = vecs[r * dc + k] * phase;
                }
            }
            let step = &mut rec.steps[n * d2..(n + 1) * d2];
            mat_mul_adj_right(tmp, vecs, step, dc);
            let (done, rest) = rec.forward.split_at_mut(n * d2);
            let fw = &mut rest[..d2];
            if n == 0 {
                fw.copy_from_slice(step);
            } else {
                mat_mul(step, &done[(n - 1) * d2..], fw, dc);
            }
        }
        trace_adj_product(&self.target, &rec.forward[(num_bins - 1) * d2..])
    }

    /// Backward sweep of one sector, adding this sector's `Z_n` into `zsum`.
    /// When `backward` is given, the products `U^b_n` are stored there.
    #[allow(clippy::too_many_arguments)]
    fn backward_sector(
        &self,
        s: usize,
        num_bins: usize,
        dt: f64,
        drives: &[C64],
        energies: &[f64],
        rec: &SectorRecord,
        zsum: &mut [C64],
        bufs: &mut [Vec<C64>; 5],
        gamma: &mut Vec<C64>,
        mut backward: Option<&mut Vec<C64>>,
    ) {
        let (dc, nb) = (self.dc(), self.num_boundary);
        let d2 = dc * dc;
        let [bk, t, x, y, tmp] = bufs;
        for b in [&mut *bk, &mut *t, &mut *x, &mut *y, &mut *tmp] {
            b.resize(d2, ZERO);
        }
        gamma.resize(d2, ZERO);
        let mut half_phase = [ZERO; 1 << crate::lattice::MAX_BLOCK_QUBITS];
        let half_phase = &mut half_phase[..dc];
        identity_into(bk, dc);
        if let Some(b) = backward.as_deref_mut() {
            b.resize((num_bins + 1) * d2, ZERO);
            b[num_bins * d2..].copy_from_slice(bk);
        }
        for n in (0..num_bins).rev() {
            let vals = &rec.values[n * dc..(n + 1) * dc];
            let vecs = &rec.vectors[n * d2..(n + 1) * d2];
            // T = U_C† U^b_{n+1}
            mat_mul_adj_left(&self.target, bk, t, dc);
            let z = &mut zsum[n * d2..(n + 1) * d2];
            match self.mode {
                GradientMode::Exact => {
                    // X = U^f_{n−1} T
                    if n == 0 {
                        x.copy_from_slice(t);
                    } else {
                        mat_mul(&rec.forward[(n - 1) * d2..n * d2], t, x, dc);
                    }
                    // X̃ = V† X V
                    mat_mul_adj_left(vecs, x, tmp, dc);
                    mat_mul(tmp, vecs, y, dc);
                    // Γ_ab = −iΔt e^{−i(λa+λb)Δt/2} sinc((λa−λb)Δt/2)
                    for (p, &l) in half_phase.iter_mut().zip(vals) {
                        *p = C64::new(0.0, -0.5 * l * dt).exp();
                    }
                    for a in 0..dc {
                        for b in 0..dc {
                            let half_diff = 0.5 * (vals[a] - vals[b]) * dt;
                            let sinc = if half_diff.abs() < 1e-4 {
                                1.0 - half_diff * half_diff / 6.0
                            } else {
                                -(half_phase[a] * half_phase[b].conj()).im / half_diff
                            };
                            gamma[a * dc + b] = C64::new(0.0, -dt) * half_phase[a] * half_phase[b] * sinc;
                        }
                    }
                    for (v, g) in y.iter_mut().zip(gamma.iter()) {
                        *v *= g;
                    }
                    // Z = V Y V†
                    mat_mul(vecs, y, tmp, dc);
                    mat_mul_adj_right(tmp, vecs, x, dc);
                    for (zz, v) in z.iter_mut().zip(x.iter()) {
                        *zz += v;
                    }
                }
                GradientMode::SecondOrder => {
                    // X' = U^f_n T, Z' = −iΔt X' − (Δt²/2)(X'H − HX')
                    mat_mul(&rec.forward[n * d2..(n + 1) * d2], t, x, dc);
                    y.copy_from_slice(&drives[n * d2..(n + 1) * d2]);
                    for c in 0..dc {
                        y[c * dc + c] += energies[(c << nb) | s];
                    }
                    mat_mul(x, y, tmp, dc);
                    let half = 0.5 * dt * dt;
                    for (zz, (xv, xh)) in z.iter_mut().zip(x.iter().zip(tmp.iter())) {
                        *zz += C64::new(0.0, -dt) * xv - xh * half;
                    }
                    mat_mul(y, x, tmp, dc);
                    for (zz, hx) in z.iter_mut().zip(tmp.iter()) {
                        *zz += hx * half;
                    }
                }
            }
            // U^b_n = U^b_{n+1} U_n
            mat_mul(bk, &rec.steps[n * d2..(n + 1) * d2], tmp, dc);
            core::mem::swap(bk, tmp);
            if let Some(b) = backward.as_deref_mut() {
                b[n * d2..(n + 1) * d2].copy_from_slice(bk);
            }
        }
    }

    /// `dF/dΩ` from the accumulated `Z_n` and the overlap `w`.
    fn gradient_from_z(
        &self,
        controls: &ControlVector,
        params: &ParameterPoint,
        zsum: &[C64],
        w: C64,
        grad: &mut [f64],
    ) {
        let (nc, dc) = (self.num_center, self.dc());
        let d2 = dc * dc;
        let inv_d = 1.0 / (1usize << (self.num_center + self.num_boundary)) as f64;
        for j in 0..nc {
            let mask = qubit_mask(nc, j);
            let half = 0.5 * params.amplitude_scales[j];
            for n in 0..controls.num_bins() {
                let z = &zsum[n * d2..(n + 1) * d2];
                let mut tx = ZERO;
                let mut ty = ZERO;
                for r in 0..dc {
                    let v = z[r * dc + (r ^ mask)];
                    tx += v;
                    ty += if r & mask == 0 { v * C64::new(0.0, 1.0) } else { v * C64::new(0.0, -1.0) };
                }
                let (sn, cs) = libm::sincos(params.detunings[j] * controls.midpoint(n));
                let dwx = (tx * cs - ty * sn) * half * inv_d;
                let dwy = (tx * sn + ty * cs) * half * inv_d;
                grad[controls.index(j, n, Axis::X)] = 2.0 * (w.conj() * dwx).re;
                grad[controls.index(j, n, Axis::Y)] = 2.0 * (w.conj() * dwy).re;
            }
        }
    }

    /// Fidelity of `controls` at `params`; when `grad` is given it receives
    /// `∂F/∂Ω` in control-vector order.
    pub fn evaluate(
        &self,
        controls: &ControlVector,
        params: &ParameterPoint,
        grad: Option<&mut [f64]>,
        ws: &mut Workspace,
    ) -> Result<f64> {
        self.check(controls, params)?;
        let (m, dt, d2) = (controls.num_bins(), controls.dt(), self.dc() * self.dc());
        let Workspace { record, drives, energies, zsum, bufs, gamma } = ws;
        self.prepare(controls, params, drives, energies)?;
        let inv_d = 1.0 / (self.num_sectors() * self.dc()) as f64;
        match grad {
            None => {
                let mut w = ZERO;
                for s in 0..self.num_sectors() {
                    w += self.forward_sector(s, m, dt, drives, energies, record, bufs);
                }
                Ok((w * inv_d).norm_sqr())
            }
            Some(g) => {
                if g.len() != controls.len() {
                    return Err(Error::DimensionMismatch { expected: controls.len(), actual: g.len() });
                }
                zsum.clear();
                zsum.resize(m * d2, ZERO);
                let mut w = ZERO;
                for s in 0..self.num_sectors() {
                    w += self.forward_sector(s, m, dt, drives, energies, record, bufs);
                    self.backward_sector(s, m, dt, drives, energies, record, zsum, bufs, gamma, None);
                }
                let w = w * inv_d;
                self.gradient_from_z(controls, params, zsum, w, g);
                Ok(w.norm_sqr())
            }
        }
    }

    /// Full propagation record (all sectors, all bins).
    pub fn record(&self, controls: &ControlVector, params: &ParameterPoint) -> Result<PropagationRecord> {
        self.check(controls, params)?;
        let (m, dt) = (controls.num_bins(), controls.dt());
        let mut drives = Vec::new();
        let mut energies = Vec::new();
        self.prepare(controls, params, &mut drives, &mut energies)?;
        let mut bufs: [Vec<C64>; 5] = Default::default();
        let mut gamma = Vec::new();
        let mut sectors = Vec::with_capacity(self.num_sectors());
        let mut backward = Vec::with_capacity(self.num_sectors());
        let mut scratch_z = vec![ZERO; m * self.dc() * self.dc()];
        for s in 0..self.num_sectors() {
            let mut rec = SectorRecord::default();
            self.forward_sector(s, m, dt, &drives, &energies, &mut rec, &mut bufs);
            let mut bk = Vec::new();
            self.backward_sector(s, m, dt, &drives, &energies, &rec, &mut scratch_z, &mut bufs, &mut gamma, Some(&mut bk));
            sectors.push(rec);
            backward.push(bk);
        }
        Ok(PropagationRecord {
            num_center: self.num_center,
            num_boundary: self.num_boundary,
            num_bins: m,
            dt,
            drives,
            energies,
            sectors,
            backward,
        })
    }

    /// Gradient from a stored record.
    pub fn gradient_from_record(
        &self,
        record: &PropagationRecord,
        controls: &ControlVector,
        params: &ParameterPoint,
    ) -> Result<Vec<f64>> {
        self.check(controls, params)?;
        if record.num_center != self.num_center
            || record.num_boundary != self.num_boundary
            || record.num_bins != controls.num_bins()
        {
            return Err(Error::DimensionMismatch { expected: record.num_bins, actual: controls.num_bins() });
        }
        let (m, d2) = (record.num_bins, self.dc() * self.dc());
        let mut zsum = vec![ZERO; m * d2];
        let mut bufs: [Vec<C64>; 5] = Default::default();
        let mut gamma = Vec::new();
        let mut w = ZERO;
        for (s, rec) in record.sectors.iter().enumerate() {
            w += trace_adj_product(&self.target, &rec.forward[(m - 1) * d2..]);
            self.backward_sector(s, m, record.dt, &record.drives, &record.energies, rec, &mut zsum, &mut bufs, &mut gamma, None);
        }
        let w = w / record.dim() as f64;
        let mut grad = vec![0.0; controls.len()];
        self.gradient_from_z(controls, params, &zsum, w, &mut grad);
        Ok(grad)
    }
}

/// Propagates one block through all bins.
pub fn propagate(block: &Block, controls: &ControlVector, params: &ParameterPoint) -> Result<PropagationRecord> {
    BlockPropagator::new(block, &TargetGate::identity_for(block.center().len()))?.record(controls, params)
}

impl TargetGate {
    /// Identity on `k` center qubits (`I` or `I2` when possible).
    pub fn identity_for(k: usize) -> Self {
        match k {
            1 => Self::identity(),
            2 => Self::identity2(),
            _ => Self { label: GateLabel::Custom, matrix: DenseMatrix::identity(1 << k) },
        }
    }
}

/// `|tr(U†(U_C ⊗ I_B))/D|²` for a full block unitary.
pub fn fidelity(u_final: &DenseMatrix, target: &TargetGate, block: &Block) -> Result<f64> {
    let full = target.block_matrix(block)?;
    if u_final.rows() != full.rows() || !u_final.is_square() {
        return Err(Error::DimensionMismatch { expected: full.rows(), actual: u_final.rows() });
    }
    let z = trace_adj_product(u_final.as_slice(), full.as_slice()) / full.rows() as f64;
    Ok(z.norm_sqr())
}

/// `∂F/∂Ω` for a stored record, exact mode.
pub fn fidelity_gradient(
    record: &PropagationRecord,
    target: &TargetGate,
    block: &Block,
    controls: &ControlVector,
    params: &ParameterPoint,
) -> Result<Vec<f64>> {
    BlockPropagator::new(block, target)?.gradient_from_record(record, controls, params)
}

fn exp_i_dt(h: &OperatorMatrix, dt: f64) -> DenseMatrix {
    expm(&h.to_dense().scale(C64::new(0.0, -dt)))
}

/// Reference propagation of the whole block with dense Padé exponentials
/// of every `H_n`; independent of the sector machinery.
pub fn propagate_dense(block: &Block, controls: &ControlVector, params: &ParameterPoint) -> Result<DenseMatrix> {
    if block.num_qubits() > 10 {
        return Err(Error::TooManyQubits { num_qubits: block.num_qubits(), limit: 10 });
    }
    controls.check_finite()?;
    let mut u = DenseMatrix::identity(block.dim());
    for n in 0..controls.num_bins() {
        let h = hamiltonian_slice(block, controls, params, n)?;
        u = exp_i_dt(&h, controls.dt()).matmul(&u);
    }
    Ok(u)
}

/// Applies `op` (on `qubits`, first listed = most significant) to a state
/// of `num_qubits`.
pub fn apply_local_operator(op: &DenseMatrix, qubits: &[usize], num_qubits: usize, state: &mut [C64]) {
    let k = qubits.len();
    let dk = 1usize << k;
    assert_eq!(op.rows(), dk, "operator size does not match qubit count");
    assert_eq!(state.len(), 1 << num_qubits);
    let masks: Vec<usize> = qubits.iter().map(|&q| qubit_mask(num_qubits, q)).collect();
    let all = masks.iter().fold(0, |a, m| a | m);
    let offsets: Vec<usize> = (0..dk)
        .map(|l| (0..k).filter(|&i| l & (1 << (k - 1 - i)) != 0).fold(0, |a, i| a | masks[i]))
        .collect();
    let mut gathered = vec![ZERO; dk];
    let mut out = vec![ZERO; dk];
    for base in (0..state.len()).filter(|s| s & all == 0) {
        for (g, &o) in gathered.iter_mut().zip(&offsets) {
            *g = state[base | o];
        }
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..dk).fold(ZERO, |acc, c| acc + op[(r, c)] * gathered[c]);
        }
        for (&o, v) in offsets.iter().zip(&out) {
            state[base | o] = *v;
        }
    }
}

/// Left-multiplies every column of `mat` by `op` embedded on `qubits`.
pub fn apply_local_to_columns(op: &DenseMatrix, qubits: &[usize], num_qubits: usize, mat: &mut DenseMatrix) {
    let d = mat.rows();
    let mut col = vec![ZERO; d];
    for c in 0..mat.cols() {
        for r in 0..d {
            col[r] = mat[(r, c)];
        }
        apply_local_operator(op, qubits, num_qubits, &mut col);
        for r in 0..d {
            mat[(r, c)] = col[r];
        }
    }
}

/// `∏_l U_l` with each block unitary embedded on its qubits, multiplied in
/// the given order (ascending smallest member for decompositions).
pub fn block_product(num_qubits: usize, blocks: &[Block], unitaries: &[DenseMatrix]) -> Result<DenseMatrix> {
    if blocks.len() != unitaries.len() {
        return Err(Error::DimensionMismatch { expected: blocks.len(), actual: unitaries.len() });
    }
    let mut total = DenseMatrix::identity(1 << num_qubits);
    for (b, u) in blocks.iter().zip(unitaries) {
        apply_local_to_columns(u, &b.global_qubits(), num_qubits, &mut total);
    }
    Ok(total)
}

fn check_array(graph: &QubitGraph, blocks: &[Block], controls: &[ControlVector]) -> Result<()> {
    if graph.num_qubits() > MAX_ARRAY_QUBITS {
        return Err(Error::TooManyQubits { num_qubits: graph.num_qubits(), limit: MAX_ARRAY_QUBITS });
    }
    if controls.len() != blocks.len() {
        return Err(Error::DimensionMismatch { expected: blocks.len(), actual: controls.len() });
    }
    for (b, c) in blocks.iter().zip(controls) {
        if c.num_center() != b.center().len() {
            return Err(Error::DimensionMismatch { expected: b.center().len(), actual: c.num_center() });
        }
        c.check_finite()?;
    }
    if let Some(first) = controls.first() {
        if controls.iter().any(|c| c.num_bins() != first.num_bins() || c.duration() != first.duration()) {
            return Err(Error::InvalidControls("all blocks must share duration and bin count".into()));
        }
    }
    Ok(())
}

/// Evolution of the whole undecomposed array Hamiltonian, with
/// `controls[l]` driving the `l`-th block of `decompose_blocks(graph,
/// pattern)`. Oracle only: at most [`MAX_ARRAY_QUBITS`] qubits.
pub fn evolve_array(
    graph: &QubitGraph,
    pattern: &DrivingPattern,
    controls: &[ControlVector],
    params: &ArrayParameters,
) -> Result<OperatorMatrix> {
    if graph.num_qubits() > MAX_ARRAY_QUBITS {
        return Err(Error::TooManyQubits { num_qubits: graph.num_qubits(), limit: MAX_ARRAY_QUBITS });
    }
    params.validate(graph)?;
    let blocks = decompose_blocks(graph, pattern)?;
    check_array(graph, &blocks, controls)?;
    let nq = graph.num_qubits();
    let dim = 1usize << nq;
    let diag = array_drift_diagonal(graph, &params.couplings);
    let Some(first) = controls.first() else {
        // nothing driven: pure drift for no time
        return Ok(OperatorMatrix::Dense(DenseMatrix::identity(dim)));
    };
    let (m, dt) = (first.num_bins(), first.dt());
    let mut cols: Vec<Vec<C64>> = (0..dim)
        .map(|c| {
            let mut v = vec![ZERO; dim];
            v[c] = ONE;
            v
        })
        .collect();
    let mut dense = DenseMatrix::identity(dim);
    for n in 0..m {
        let mut drives = Vec::new();
        for (b, cv) in blocks.iter().zip(controls) {
            for (j, &q) in b.center().iter().enumerate() {
                let (om, omp) = envelope_at_bin(cv, j, n, params.detunings[q]);
                let half = 0.5 * params.amplitude_scales[q];
                drives.push(DriveTerm { qubit: q, cx: half * om, cy: half * omp });
            }
        }
        let h = sparse_hamiltonian(nq, &diag, &drives);
        if dim <= DENSE_EXPM_MAX_DIM {
            dense = expm(&h.to_dense().scale(C64::new(0.0, -dt))).matmul(&dense);
        } else {
            for col in cols.iter_mut() {
                *col = expm_multiply(&h, dt, col, KRYLOV_TOLERANCE);
            }
        }
    }
    if dim > DENSE_EXPM_MAX_DIM {
        dense = DenseMatrix::from_fn(dim, dim, |r, c| cols[c][r]);
    }
    Ok(OperatorMatrix::Dense(dense))
}

/// The same evolution assembled from independent block propagations.
pub fn evolve_blocks(
    graph: &QubitGraph,
    pattern: &DrivingPattern,
    controls: &[ControlVector],
    params: &ArrayParameters,
) -> Result<DenseMatrix> {
    params.validate(graph)?;
    let blocks = decompose_blocks(graph, pattern)?;
    check_array(graph, &blocks, controls)?;
    let unitaries = blocks
        .iter()
        .zip(controls)
        .map(|(b, cv)| Ok(propagate(b, cv, &params.restrict(b)?)?.final_unitary()))
        .collect::<Result<Vec<_>>>()?;
    block_product(graph.num_qubits(), &blocks, &unitaries)
}

/// Largest change of any computational-basis probability after drift-only
/// evolution for time `t`.
pub fn readout_invariance_check(state: &[C64], graph: &QubitGraph, t: f64) -> Result<f64> {
    let nq = graph.num_qubits();
    if nq > MAX_ARRAY_QUBITS {
        return Err(Error::TooManyQubits { num_qubits: nq, limit: MAX_ARRAY_QUBITS });
    }
    if state.len() != 1 << nq {
        return Err(Error::DimensionMismatch { expected: 1 << nq, actual: state.len() });
    }
    let norm = libm::sqrt(state.iter().map(|c| c.norm_sqr()).sum::<f64>());
    if !((norm - 1.0).abs() <= 1e-10) {
        return Err(Error::UnnormalizedState(norm));
    }
    let couplings: Vec<f64> = graph.edges().iter().map(|e| e.coupling).collect();
    let h = sparse_hamiltonian(nq, &array_drift_diagonal(graph, &couplings), &[]);
    let evolved = expm_multiply(&h, t, state, KRYLOV_TOLERANCE);
    Ok(state.iter().zip(&evolved).fold(0.0, |m, (a, b)| m.max((a.norm_sqr() - b.norm_sqr()).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BlockCoupling;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_controls(rng: &mut ChaCha8Rng, t: f64, m: usize, nc: usize, amp: f64) -> ControlVector {
        let v = (0..2 * m * nc).map(|_| rng.gen_range(-amp..amp)).collect();
        ControlVector::from_values(t, m, nc, v).unwrap()
    }

    fn random_params(rng: &mut ChaCha8Rng, block: &Block) -> ParameterPoint {
        let nc = block.center().len();
        ParameterPoint {
            couplings: block.couplings().iter().map(|c| c.coupling * rng.gen_range(0.8..1.2)).collect(),
            amplitude_scales: (0..nc).map(|_| rng.gen_range(0.9..1.1)).collect(),
            detunings: (0..nc).map(|_| rng.gen_range(-0.3..0.3)).collect(),
        }
    }

    #[test]
    fn sector_propagation_matches_dense_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pair = Block::new(
            2,
            3,
            vec![
                BlockCoupling { a: 0, b: 1, coupling: 0.9 },
                BlockCoupling { a: 0, b: 2, coupling: 1.1 },
                BlockCoupling { a: 1, b: 3, coupling: 1.0 },
                BlockCoupling { a: 1, b: 4, coupling: 0.7 },
            ],
        )
        .unwrap();
        for block in [Block::star(&[1.0, 0.8, 1.2]).unwrap(), pair] {
            let cv = random_controls(&mut rng, 2.0, 7, block.center().len(), 4.0);
            let p = random_params(&mut rng, &block);
            let rec = propagate(&block, &cv, &p).unwrap();
            let dense = propagate_dense(&block, &cv, &p).unwrap();
            assert!(rec.final_unitary().max_abs_diff(&dense) < 1e-12);
            for n in 0..cv.num_bins() {
                assert!(rec.step(n).unitarity_error() < 1e-12);
                let joined = rec.backward(n + 1).matmul(&rec.forward(n));
                assert!(joined.max_abs_diff(&dense) < 1e-12);
            }
        }
    }

    #[test]
    fn undriven_edge_gives_diagonal_phases() {
        let b = Block::star(&[1.0]).unwrap();
        let t = 0.7;
        let cv = ControlVector::zeros(t, 4, 1).unwrap();
        let u = propagate(&b, &cv, &ParameterPoint::nominal(&b)).unwrap().final_unitary();
        let e = |s: f64| C64::new(0.0, -s * t).exp();
        let expect = DenseMatrix::from_diagonal(&[e(1.0), e(-1.0), e(-1.0), e(1.0)]);
        assert!(u.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn pi_pulse() {
        let b = Block::new(1, 0, vec![]).unwrap();
        let t = 1.3;
        let mut cv = ControlVector::zeros(t, 5, 1).unwrap();
        for n in 0..5 {
            cv.set(0, n, Axis::X, core::f64::consts::PI / t);
        }
        let u = propagate(&b, &cv, &ParameterPoint::nominal(&b)).unwrap().final_unitary();
        let expect = DenseMatrix::from_row_major(2, 2, vec![ZERO, C64::new(0.0, -1.0), C64::new(0.0, -1.0), ZERO]);
        assert!(u.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn fidelity_is_phase_invariant() {
        let b = Block::star(&[1.0, 1.0, 1.0]).unwrap();
        let h = TargetGate::hadamard();
        let full = h.block_matrix(&b).unwrap();
        assert!((fidelity(&full, &h, &b).unwrap() - 1.0).abs() < 1e-14);
        let phased = full.scale(C64::from_polar(1.0, 0.83));
        assert!((fidelity(&phased, &h, &b).unwrap() - 1.0).abs() < 1e-14);
        // tr(H) = 0, so the identity has no overlap with H ⊗ I
        assert!(fidelity(&DenseMatrix::identity(16), &h, &b).unwrap() < 1e-30);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let block = Block::star(&[1.0, 0.9]).unwrap();
        let target = TargetGate::hadamard();
        let prop = BlockPropagator::new(&block, &target).unwrap();
        let cv = random_controls(&mut rng, 2.0, 6, 1, 3.0);
        let p = random_params(&mut rng, &block);
        let mut ws = Workspace::default();
        let mut g = vec![0.0; cv.len()];
        prop.evaluate(&cv, &p, Some(&mut g), &mut ws).unwrap();
        let h = 1e-6;
        for i in 0..cv.len() {
            let mut plus = cv.clone();
            plus.values_mut()[i] += h;
            let mut minus = cv.clone();
            minus.values_mut()[i] -= h;
            let fd = (prop.evaluate(&plus, &p, None, &mut ws).unwrap()
                - prop.evaluate(&minus, &p, None, &mut ws).unwrap())
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "component {i}: {fd} vs {}", g[i]);
        }
        let rec = prop.record(&cv, &p).unwrap();
        let g2 = prop.gradient_from_record(&rec, &cv, &p).unwrap();
        assert!(g.iter().zip(&g2).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn second_order_mode_is_close_for_small_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let block = Block::star(&[1.0, 1.0, 1.0]).unwrap();
        let cv = random_controls(&mut rng, 1.0, 400, 1, 2.0);
        let p = ParameterPoint::nominal(&block);
        let exact = BlockPropagator::new(&block, &TargetGate::hadamard()).unwrap();
        let approx = exact.clone().with_mode(GradientMode::SecondOrder);
        let mut ws = Workspace::default();
        let mut g1 = vec![0.0; cv.len()];
        let mut g2 = vec![0.0; cv.len()];
        exact.evaluate(&cv, &p, Some(&mut g1), &mut ws).unwrap();
        approx.evaluate(&cv, &p, Some(&mut g2), &mut ws).unwrap();
        let scale = g1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = g1.iter().zip(&g2).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-4 * scale, "err {err}, scale {scale}");
    }

    #[test]
    fn local_operator_on_single_qubit() {
        let x = TargetGate::pauli_x().matrix().clone();
        let mut state = vec![ZERO; 8];
        state[0] = ONE;
        apply_local_operator(&x, &[1], 3, &mut state);
        assert_eq!(state[2], ONE);
    }

    #[test]
    fn readout_rejects_unnormalized_states() {
        let g = crate::lattice::build_chain(2, &crate::lattice::CouplingAssignment::Uniform(1.0)).unwrap();
        let s = vec![ONE, ONE, ZERO, ZERO];
        assert!(matches!(readout_invariance_check(&s, &g, 1.0), Err(Error::UnnormalizedState(_))));
    }
}
