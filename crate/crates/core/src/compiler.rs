//! Circuits, schedules of driving patterns, and end-to-end simulation of a
//! schedule with a pulse library.
//!
//! Scheduling is greedy. At every step the ready gates (all earlier gates
//! on their qubits already executed) are collected; if one of them is a
//! two-qubit gate, the first such gate fixes the step's pattern through
//! [`two_qubit_pattern`], otherwise the sublattice pattern covering the
//! most ready gates is used. Every ready gate whose qubits are exactly the
//! leading center qubits of a block of that pattern is executed; all other
//! blocks run the direct identity.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::hamiltonian::{ArrayParameters, ControlVector, OperatorMatrix};
use crate::lattice::{
    decompose_blocks, single_qubit_pattern_variants, two_qubit_pattern, validate_pattern, Block, DrivingPattern,
    PatternReport, QubitGraph,
};
use crate::linalg::{trace_adj_product, DenseMatrix};
use crate::propagation::{apply_local_to_columns, evolve_array, TargetGate, MAX_ARRAY_QUBITS};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub gate: TargetGate,
    pub qubits: Vec<usize>,
}

impl Instruction {
    pub fn new(gate: TargetGate, qubits: Vec<usize>) -> Result<Self> {
        if gate.num_qubits() != qubits.len() {
            return Err(Error::InvalidCircuit(format!(
                "{} acts on {} qubit(s), {} given",
                gate.name(),
                gate.num_qubits(),
                qubits.len()
            )));
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(Error::InvalidCircuit(format!("{} on repeated qubit {}", gate.name(), qubits[0])));
        }
        Ok(Self { gate, qubits })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    instructions: Vec<Instruction>,
}

impl Circuit {
    pub fn new(instructions: Vec<Instruction>) -> Self {
        Self { instructions }
    }

    /// One instruction per line, e.g. `H 5`, `CNOT 5 6`. Blank lines and
    /// text after `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut instructions = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let name = words.next().expect("non-empty line");
            let gate = TargetGate::parse(name)
                .ok_or_else(|| Error::InvalidCircuit(format!("line {}: unknown gate '{name}'", lineno + 1)))?;
            let qubits = words
                .map(|w| {
                    w.parse::<usize>()
                        .map_err(|_| Error::InvalidCircuit(format!("line {}: bad qubit index '{w}'", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            instructions.push(
                Instruction::new(gate, qubits)
                    .map_err(|e| Error::InvalidCircuit(format!("line {}: {e}", lineno + 1)))?,
            );
        }
        Ok(Self { instructions })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for ins in &self.instructions {
            s.push_str(ins.gate.name());
            for q in &ins.qubits {
                s.push(' ');
                s.push_str(&q.to_string());
            }
            s.push('\n');
        }
        s
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Number of layers when every gate runs as early as its qubits allow.
    pub fn depth(&self) -> usize {
        let mut level: BTreeMap<usize, usize> = BTreeMap::new();
        let mut depth = 0;
        for ins in &self.instructions {
            let l = 1 + ins.qubits.iter().map(|q| level.get(q).copied().unwrap_or(0)).max().unwrap_or(0);
            for &q in &ins.qubits {
                level.insert(q, l);
            }
            depth = depth.max(l);
        }
        depth
    }

    /// Checks indices and that two-qubit gates sit on edges.
    pub fn validate(&self, graph: &QubitGraph) -> Result<()> {
        for ins in &self.instructions {
            for &q in &ins.qubits {
                if q >= graph.num_qubits() {
                    return Err(Error::QubitOutOfRange { index: q, num_qubits: graph.num_qubits() });
                }
            }
            if ins.qubits.len() == 2 && !graph.has_edge(ins.qubits[0], ins.qubits[1]) {
                return Err(Error::NotAnEdge(ins.qubits[0], ins.qubits[1]));
            }
            if ins.qubits.len() > 2 {
                return Err(Error::InvalidCircuit(format!("{}-qubit gates are not supported", ins.qubits.len())));
            }
        }
        Ok(())
    }
}

/// One time step: a pattern, its blocks, and one target per block.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub pattern: DrivingPattern,
    pub blocks: Vec<Block>,
    pub targets: Vec<TargetGate>,
    /// `(circuit gate index, block index)` for every gate executed here.
    pub gates: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule {
    pub steps: Vec<Step>,
    pub circuit_depth: usize,
}

impl Schedule {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }
}

fn fits(block: &Block, qubits: &[usize]) -> bool {
    block.center().len() >= qubits.len() && block.center()[..qubits.len()] == *qubits
}

/// Greedy layering of `circuit` onto `graph`. Deterministic.
pub fn compile(circuit: &Circuit, graph: &QubitGraph) -> Result<Schedule> {
    circuit.validate(graph)?;
    let gates = circuit.instructions();
    let mut done = vec![false; gates.len()];
    let mut remaining = gates.len();
    let mut steps = Vec::new();
    let variants = if gates.iter().any(|g| g.qubits.len() == 1) {
        single_qubit_pattern_variants(graph)?
    } else {
        Vec::new()
    };
    while remaining > 0 {
        let mut busy = BTreeSet::new();
        let mut ready = Vec::new();
        for (i, g) in gates.iter().enumerate() {
            if done[i] {
                continue;
            }
            if g.qubits.iter().all(|q| !busy.contains(q)) {
                ready.push(i);
            }
            busy.extend(g.qubits.iter().copied());
        }
        let pattern = match ready.iter().find(|&&i| gates[i].qubits.len() == 2) {
            Some(&i) => two_qubit_pattern(graph, (gates[i].qubits[0], gates[i].qubits[1]))?,
            None => {
                let score = |p: &DrivingPattern| ready.iter().filter(|&&i| p.is_driven(gates[i].qubits[0])).count();
                let first = |p: &DrivingPattern| ready.iter().position(|&i| p.is_driven(gates[i].qubits[0]));
                let best = variants
                    .iter()
                    .max_by(|a, b| {
                        score(a)
                            .cmp(&score(b))
                            .then_with(|| first(b).unwrap_or(usize::MAX).cmp(&first(a).unwrap_or(usize::MAX)))
                    })
                    .filter(|p| score(p) > 0)
                    .ok_or_else(|| {
                        Error::InvalidCircuit(format!("no driving pattern drives qubit {}", gates[ready[0]].qubits[0]))
                    })?;
                best.clone()
            }
        };
        let blocks = decompose_blocks(graph, &pattern)?;
        let mut targets: Vec<Option<TargetGate>> = vec![None; blocks.len()];
        let mut placed = Vec::new();
        for &i in &ready {
            let g = &gates[i];
            if let Some(b) = (0..blocks.len()).find(|&b| targets[b].is_none() && fits(&blocks[b], &g.qubits)) {
                targets[b] = Some(g.gate.clone());
                placed.push((i, b));
                done[i] = true;
                remaining -= 1;
            }
        }
        if placed.is_empty() {
            return Err(Error::InvalidCircuit(format!("gate {} cannot be placed", ready[0])));
        }
        let targets = targets
            .into_iter()
            .zip(&blocks)
            .map(|(t, b)| t.unwrap_or_else(|| TargetGate::identity_for(b.center().len())))
            .collect();
        steps.push(Step { pattern, blocks, targets, gates: placed });
    }
    Ok(Schedule { steps, circuit_depth: circuit.depth() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleIssue {
    MissingGate(usize),
    DuplicatedGate(usize),
    /// Gate `.1` shares a qubit with earlier gate `.0` but does not run
    /// strictly later.
    OrderViolation(usize, usize),
    /// The gate is not on the leading center qubits of its block or the
    /// block target differs from it.
    Misplaced(usize),
    /// A block with no circuit gate whose target is not the identity.
    UnexpectedTarget { step: usize, block: usize },
    /// Blocks or targets disagree with the step's pattern.
    InconsistentStep(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleReport {
    pub pattern_violations: Vec<(usize, PatternReport)>,
    pub issues: Vec<ScheduleIssue>,
    pub step_count: usize,
    pub circuit_depth: usize,
    /// `step_count / circuit_depth` (1 for an empty circuit).
    pub overhead: f64,
    /// Set when the overhead exceeds 2; reported, not a failure.
    pub overhead_exceeded: bool,
}

impl ScheduleReport {
    pub fn is_valid(&self) -> bool {
        self.pattern_violations.is_empty() && self.issues.is_empty()
    }
}

fn is_identity(m: &DenseMatrix) -> bool {
    m.max_abs_diff(&DenseMatrix::identity(m.rows())) == 0.0
}

/// Checks pattern validity, block targets, gate coverage and order.
pub fn verify_schedule(schedule: &Schedule, circuit: &Circuit, graph: &QubitGraph) -> ScheduleReport {
    let gates = circuit.instructions();
    let mut pattern_violations = Vec::new();
    let mut issues = Vec::new();
    let mut step_of: Vec<Option<usize>> = vec![None; gates.len()];
    for (s, step) in schedule.steps.iter().enumerate() {
        let report = validate_pattern(graph, &step.pattern);
        if !report.is_valid() {
            pattern_violations.push((s, report));
            continue;
        }
        let consistent = decompose_blocks(graph, &step.pattern).is_ok_and(|b| b == step.blocks)
            && step.targets.len() == step.blocks.len()
            && step.targets.iter().zip(&step.blocks).all(|(t, b)| t.num_qubits() <= b.center().len());
        if !consistent {
            issues.push(ScheduleIssue::InconsistentStep(s));
            continue;
        }
        let mut used = vec![false; step.blocks.len()];
        for &(g, b) in &step.gates {
            let Some(ins) = gates.get(g) else {
                issues.push(ScheduleIssue::Misplaced(g));
                continue;
            };
            if step_of[g].is_some() {
                issues.push(ScheduleIssue::DuplicatedGate(g));
                continue;
            }
            step_of[g] = Some(s);
            let ok = b < step.blocks.len()
                && !used[b]
                && fits(&step.blocks[b], &ins.qubits)
                && step.targets[b].matrix().max_abs_diff(ins.gate.matrix()) == 0.0;
            if ok {
                used[b] = true;
            } else {
                issues.push(ScheduleIssue::Misplaced(g));
            }
        }
        for (b, t) in step.targets.iter().enumerate() {
            if !used[b] && !is_identity(t.matrix()) {
                issues.push(ScheduleIssue::UnexpectedTarget { step: s, block: b });
            }
        }
    }
    for (g, s) in step_of.iter().enumerate() {
        if s.is_none() {
            issues.push(ScheduleIssue::MissingGate(g));
        }
    }
    for j in 0..gates.len() {
        for i in 0..j {
            if gates[i].qubits.iter().any(|q| gates[j].qubits.contains(q)) {
                if let (Some(si), Some(sj)) = (step_of[i], step_of[j]) {
                    if si >= sj {
                        issues.push(ScheduleIssue::OrderViolation(i, j));
                    }
                }
            }
        }
    }
    let step_count = schedule.steps.len();
    let circuit_depth = circuit.depth();
    let overhead = if circuit_depth == 0 { 1.0 } else { step_count as f64 / circuit_depth as f64 };
    ScheduleReport {
        pattern_violations,
        issues,
        step_count,
        circuit_depth,
        overhead,
        overhead_exceeded: overhead > 2.0,
    }
}

/// Congruence class of a block: pulses optimized for one member serve
/// every member with nominal parameters. Two blocks share a shape when
/// their center couplings agree and their boundary qubits, each described
/// by its couplings to the numbered center qubits, agree as multisets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockShape {
    num_center: usize,
    center_couplings: Vec<(usize, usize, u64)>,
    boundary: Vec<Vec<(usize, u64)>>,
}

impl BlockShape {
    pub fn of(block: &Block) -> Self {
        let nc = block.center().len();
        let mut center_couplings = Vec::new();
        let mut boundary = vec![Vec::new(); block.boundary().len()];
        for c in block.couplings() {
            let bits = c.coupling.to_bits();
            if c.b < nc {
                center_couplings.push((c.a, c.b, bits));
            } else {
                boundary[c.b - nc].push((c.a, bits));
            }
        }
        center_couplings.sort_unstable();
        for b in boundary.iter_mut() {
            b.sort_unstable();
        }
        boundary.sort_unstable();
        Self { num_center: nc, center_couplings, boundary }
    }

    pub fn num_center(&self) -> usize {
        self.num_center
    }

    pub fn num_boundary(&self) -> usize {
        self.boundary.len()
    }

    /// Compact human-readable form, e.g. `1c3b[0-b:1,0-b:1,0-b:1]`.
    pub fn describe(&self) -> String {
        let mut s = format!("{}c{}b[", self.num_center, self.boundary.len());
        let mut first = true;
        let mut push = |s: &mut String, t: String| {
            if !first {
                s.push(',');
            }
            first = false;
            s.push_str(&t);
        };
        for &(a, b, j) in &self.center_couplings {
            push(&mut s, format!("{a}-{b}:{}", f64::from_bits(j)));
        }
        for sig in &self.boundary {
            let parts: Vec<String> = sig.iter().map(|&(c, j)| format!("{c}-b:{}", f64::from_bits(j))).collect();
            push(&mut s, parts.join("+"));
        }
        s.push(']');
        s
    }
}

/// Library key for a gate: its name, with identities on more than two
/// qubits and custom gates distinguished by size.
pub fn gate_key(gate: &TargetGate) -> String {
    match gate.name() {
        "custom" if is_identity(gate.matrix()) => format!("I{}", gate.num_qubits()),
        "custom" => format!("custom{}", gate.num_qubits()),
        n => n.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseLibrary {
    entries: BTreeMap<(String, BlockShape), ControlVector>,
}

impl PulseLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, gate: &TargetGate, shape: BlockShape, controls: ControlVector) -> Result<()> {
        if controls.num_center() != shape.num_center() {
            return Err(Error::DimensionMismatch { expected: shape.num_center(), actual: controls.num_center() });
        }
        self.entries.insert((gate_key(gate), shape), controls);
        Ok(())
    }

    pub fn get(&self, gate: &TargetGate, shape: &BlockShape) -> Option<&ControlVector> {
        self.entries.get(&(gate_key(gate), shape.clone()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BlockShape, &ControlVector)> {
        self.entries.iter().map(|((g, s), c)| (g.as_str(), s, c))
    }
}

/// Every distinct (target, shape) a schedule needs, with the first block
/// of that shape as representative.
pub fn library_requirements(schedule: &Schedule) -> Vec<(TargetGate, Block)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for step in &schedule.steps {
        for (b, t) in step.blocks.iter().zip(&step.targets) {
            if seen.insert((gate_key(t), BlockShape::of(b))) {
                out.push((t.clone(), b.clone()));
            }
        }
    }
    out
}

/// Product of the step evolutions of the full array Hamiltonian, last step
/// leftmost. At most [`MAX_ARRAY_QUBITS`] qubits.
pub fn simulate_schedule(
    schedule: &Schedule,
    graph: &QubitGraph,
    library: &PulseLibrary,
    params: &ArrayParameters,
) -> Result<OperatorMatrix> {
    let nq = graph.num_qubits();
    if nq > MAX_ARRAY_QUBITS {
        return Err(Error::TooManyQubits { num_qubits: nq, limit: MAX_ARRAY_QUBITS });
    }
    let mut total = DenseMatrix::identity(1 << nq);
    for step in &schedule.steps {
        let controls = step
            .blocks
            .iter()
            .zip(&step.targets)
            .map(|(b, t)| {
                let shape = BlockShape::of(b);
                library.get(t, &shape).cloned().ok_or_else(|| Error::MissingPulse {
                    target: gate_key(t),
                    shape: shape.describe(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let u = evolve_array(graph, &step.pattern, &controls, params)?.to_dense();
        total = u.matmul(&total);
    }
    Ok(OperatorMatrix::Dense(total))
}

/// Exact unitary of the circuit on `num_qubits` qubits (qubit 0 most
/// significant).
pub fn ideal_circuit_unitary(circuit: &Circuit, num_qubits: usize) -> Result<DenseMatrix> {
    if num_qubits > MAX_ARRAY_QUBITS {
        return Err(Error::TooManyQubits { num_qubits, limit: MAX_ARRAY_QUBITS });
    }
    let mut u = DenseMatrix::identity(1 << num_qubits);
    for ins in circuit.instructions() {
        if let Some(&q) = ins.qubits.iter().find(|&&q| q >= num_qubits) {
            return Err(Error::QubitOutOfRange { index: q, num_qubits });
        }
        apply_local_to_columns(ins.gate.matrix(), &ins.qubits, num_qubits, &mut u);
    }
    Ok(u)
}

/// `|tr(A†B)/D|²`, insensitive to a global phase.
pub fn process_fidelity(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() || !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), actual: b.rows() });
    }
    Ok((trace_adj_product(a.as_slice(), b.as_slice()) / a.rows() as f64).norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_honeycomb, CouplingAssignment};

    #[test]
    fn parse_round_trip() {
        let c = Circuit::parse("H 5\n# comment\nCNOT 5 6  # tail\n\nt 2\n").unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.to_text(), "H 5\nCNOT 5 6\nT 2\n");
        assert!(Circuit::parse("CNOT 1").is_err());
        assert!(Circuit::parse("FOO 1").is_err());
        assert!(Circuit::parse("H x").is_err());
    }

    #[test]
    fn depth_layers() {
        let c = Circuit::parse("H 0\nH 1\nCNOT 0 1\nT 2\nH 0").unwrap();
        assert_eq!(c.depth(), 3);
        assert_eq!(Circuit::default().depth(), 0);
    }

    #[test]
    fn sublattice_gates_share_a_step() {
        let g = build_honeycomb(2, 2, &CouplingAssignment::Uniform(1.0)).unwrap();
        let p = crate::lattice::single_qubit_pattern(&g).unwrap();
        let text: String = p.driven.iter().map(|q| format!("H {q}\n")).collect();
        let c = Circuit::parse(&text).unwrap();
        let s = compile(&c, &g).unwrap();
        assert_eq!(s.step_count(), 1);
        assert!(verify_schedule(&s, &c, &g).is_valid());
    }

    #[test]
    fn dropped_gate_is_reported() {
        let g = build_honeycomb(1, 1, &CouplingAssignment::Uniform(1.0)).unwrap();
        let c = Circuit::parse("H 0\nH 1").unwrap();
        let mut s = compile(&c, &g).unwrap();
        s.steps.last_mut().unwrap().gates.pop();
        let r = verify_schedule(&s, &c, &g);
        assert!(r.issues.iter().any(|i| matches!(i, ScheduleIssue::MissingGate(_))));
    }

    #[test]
    fn shapes_ignore_boundary_order() {
        use crate::lattice::BlockCoupling;
        let a = Block::star(&[1.0, 2.0, 1.0]).unwrap();
        let b = Block::star(&[2.0, 1.0, 1.0]).unwrap();
        assert_eq!(BlockShape::of(&a), BlockShape::of(&b));
        // same coupling multiset, different attachment to the center pair
        let pair = |extra: [(usize, usize); 2]| {
            let mut c = vec![BlockCoupling { a: 0, b: 1, coupling: 1.0 }];
            c.push(BlockCoupling { a: 0, b: 2, coupling: 1.0 });
            for (a, b) in extra {
                c.push(BlockCoupling { a, b, coupling: 1.0 });
            }
            Block::new(2, 3, c).unwrap()
        };
        assert_ne!(BlockShape::of(&pair([(0, 3), (1, 4)])), BlockShape::of(&pair([(1, 3), (1, 4)])));
    }

    #[test]
    fn empty_schedule_simulates_to_identity() {
        let g = build_honeycomb(1, 1, &CouplingAssignment::Uniform(1.0)).unwrap();
        let s = compile(&Circuit::default(), &g).unwrap();
        assert_eq!(s.step_count(), 0);
        let u = simulate_schedule(&s, &g, &PulseLibrary::new(), &ArrayParameters::nominal(&g)).unwrap();
        assert_eq!(u.to_dense().max_abs_diff(&DenseMatrix::identity(1 << g.num_qubits())), 0.0);
    }
}
