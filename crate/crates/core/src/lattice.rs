//! Coupling graphs, driving patterns and the commuting-block decomposition.
//!
//! # Coordinates
//!
//! Honeycomb patches use a brick-wall embedding. A patch of `rows × cols`
//! hexagonal cells has vertex rows `r = 0..=rows`; cell `(i, k)` spans
//! columns `x0..=x0 + 2` of vertex rows `i` and `i + 1`, with
//! `x0 = 2k + (i mod 2)`, and carries vertical rungs at `x0` and `x0 + 2`.
//! Vertices are numbered row-major by `(r, x)`. The two sublattices are the
//! parity classes of `r + x`.
//!
//! Square patches use `(row, col)` with index `row·cols + col`; chains use
//! `(0, i)`.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Largest block the decomposition will produce (square-lattice two-qubit
/// block).
pub const MAX_BLOCK_QUBITS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Geometry {
    Honeycomb,
    Square,
    Chain,
    Custom,
}

impl Geometry {
    pub fn as_str(self) -> &'static str {
        match self {
            Geometry::Honeycomb => "honeycomb",
            Geometry::Square => "square",
            Geometry::Chain => "chain",
            Geometry::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "honeycomb" => Some(Geometry::Honeycomb),
            "square" => Some(Geometry::Square),
            "chain" => Some(Geometry::Chain),
            "custom" => Some(Geometry::Custom),
            _ => None,
        }
    }

    fn max_degree(self) -> Option<usize> {
        match self {
            Geometry::Honeycomb => Some(3),
            Geometry::Square => Some(4),
            Geometry::Chain => Some(2),
            Geometry::Custom => None,
        }
    }
}

/// A ZZ-coupled pair with its coupling strength (units of `J̄`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub coupling: f64,
}

impl Edge {
    pub fn new(a: usize, b: usize, coupling: f64) -> Self {
        Self { a, b, coupling }
    }

    pub fn touches(&self, q: usize) -> bool {
        self.a == q || self.b == q
    }

    pub fn other(&self, q: usize) -> usize {
        if self.a == q {
            self.b
        } else {
            self.a
        }
    }
}

/// How coupling strengths are assigned to generated edges.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingAssignment {
    Uniform(f64),
    /// One value per edge, in the generated edge order.
    PerEdge(Vec<f64>),
}

impl CouplingAssignment {
    fn resolve(&self, num_edges: usize) -> Result<Vec<f64>> {
        match self {
            CouplingAssignment::Uniform(j) => Ok(vec![*j; num_edges]),
            CouplingAssignment::PerEdge(v) if v.len() == num_edges => Ok(v.clone()),
            CouplingAssignment::PerEdge(v) => Err(Error::InvalidGraph(format!(
                "{} coupling values supplied for {} edges",
                v.len(),
                num_edges
            ))),
        }
    }
}

/// The physical array: qubits and their fixed ZZ couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitGraph {
    num_qubits: usize,
    edges: Vec<Edge>,
    geometry: Geometry,
    coords: Option<Vec<(i64, i64)>>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl QubitGraph {
    /// Validates and builds a graph. Coordinates are required for every
    /// geometry except `Custom`, where they are ignored by the pattern
    /// generators.
    pub fn new(
        num_qubits: usize,
        edges: Vec<Edge>,
        geometry: Geometry,
        coords: Option<Vec<(i64, i64)>>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); num_qubits];
        for (id, e) in edges.iter().enumerate() {
            if e.a >= num_qubits || e.b >= num_qubits {
                return Err(Error::QubitOutOfRange { index: e.a.max(e.b), num_qubits });
            }
            if e.a == e.b {
                return Err(Error::InvalidGraph(format!("self-loop on qubit {}", e.a)));
            }
            if !seen.insert((e.a.min(e.b), e.a.max(e.b))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({}, {})", e.a, e.b)));
            }
            if !e.coupling.is_finite() || e.coupling == 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "coupling on ({}, {}) must be finite and nonzero, got {}",
                    e.a, e.b, e.coupling
                )));
            }
            adjacency[e.a].push((e.b, id));
            adjacency[e.b].push((e.a, id));
        }
        if let Some(max) = geometry.max_degree() {
            if let Some(q) = (0..num_qubits).find(|&q| adjacency[q].len() > max) {
                return Err(Error::InvalidGraph(format!(
                    "qubit {q} has degree {} > {max} allowed for {} geometry",
                    adjacency[q].len(),
                    geometry.as_str()
                )));
            }
        }
        if let Some(c) = &coords {
            if c.len() != num_qubits {
                return Err(Error::InvalidGraph(format!(
                    "{} coordinates for {num_qubits} qubits",
                    c.len()
                )));
            }
        } else if geometry != Geometry::Custom {
            return Err(Error::InvalidGraph(format!(
                "{} geometry requires vertex coordinates",
                geometry.as_str()
            )));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Self { num_qubits, edges, geometry, coords, adjacency })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn coords(&self) -> Option<&[(i64, i64)]> {
        self.coords.as_deref()
    }

    pub fn degree(&self, q: usize) -> usize {
        self.adjacency[q].len()
    }

    /// Neighbours of `q` in ascending order.
    pub fn neighbors(&self, q: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[q].iter().map(|&(n, _)| n)
    }

    /// `(neighbour, edge index)` pairs of `q`.
    pub fn incident(&self, q: usize) -> &[(usize, usize)] {
        &self.adjacency[q]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        if a >= self.num_qubits {
            return None;
        }
        self.adjacency[a].iter().find(|&&(n, _)| n == b).map(|&(_, id)| id)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_index(a, b).is_some()
    }

    /// Induced subgraph on `keep` (renumbered in ascending order of the
    /// kept indices), keeping geometry and coordinates.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Result<Self> {
        let mut kept: Vec<usize> = keep.to_vec();
        kept.sort_unstable();
        kept.dedup();
        let mut map = BTreeMap::new();
        for (new, &old) in kept.iter().enumerate() {
            if old >= self.num_qubits {
                return Err(Error::QubitOutOfRange { index: old, num_qubits: self.num_qubits });
            }
            map.insert(old, new);
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|e| match (map.get(&e.a), map.get(&e.b)) {
                (Some(&a), Some(&b)) => Some(Edge::new(a, b, e.coupling)),
                _ => None,
            })
            .collect();
        let coords = self.coords.as_ref().map(|c| kept.iter().map(|&q| c[q]).collect());
        Self::new(kept.len(), edges, self.geometry, coords)
    }

    fn parity(&self, q: usize) -> Option<u8> {
        self.coords.as_ref().map(|c| (c[q].0 + c[q].1).rem_euclid(2) as u8)
    }
}

fn graph_from_sets(
    vertices: BTreeSet<(i64, i64)>,
    edge_set: BTreeSet<((i64, i64), (i64, i64))>,
    geometry: Geometry,
    couplings: &CouplingAssignment,
) -> Result<QubitGraph> {
    let coords: Vec<(i64, i64)> = vertices.into_iter().collect();
    let index: BTreeMap<(i64, i64), usize> = coords.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut pairs: Vec<(usize, usize)> = edge_set
        .into_iter()
        .map(|(p, q)| {
            let (a, b) = (index[&p], index[&q]);
            (a.min(b), a.max(b))
        })
        .collect();
    pairs.sort_unstable();
    let values = couplings.resolve(pairs.len())?;
    let edges = pairs.into_iter().zip(values).map(|((a, b), j)| Edge::new(a, b, j)).collect();
    QubitGraph::new(coords.len(), edges, geometry, Some(coords))
}

/// Honeycomb patch of `rows × cols` hexagonal cells in the brick-wall
/// embedding described in the module docs.
pub fn build_honeycomb(rows: usize, cols: usize, couplings: &CouplingAssignment) -> Result<QubitGraph> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidDimensions(format!("honeycomb needs rows, cols >= 1, got {rows}x{cols}")));
    }
    let mut vertices = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for i in 0..rows as i64 {
        for k in 0..cols as i64 {
            let x0 = 2 * k + i.rem_euclid(2);
            for r in [i, i + 1] {
                for x in x0..=x0 + 2 {
                    vertices.insert((r, x));
                }
                edges.insert(((r, x0), (r, x0 + 1)));
                edges.insert(((r, x0 + 1), (r, x0 + 2)));
            }
            edges.insert(((i, x0), (i + 1, x0)));
            edges.insert(((i, x0 + 2), (i + 1, x0 + 2)));
        }
    }
    graph_from_sets(vertices, edges, Geometry::Honeycomb, couplings)
}

/// Open chain `0 − 1 − … − (n−1)`.
pub fn build_chain(n: usize, couplings: &CouplingAssignment) -> Result<QubitGraph> {
    if n < 2 {
        return Err(Error::InvalidDimensions(format!("chain needs n >= 2, got {n}")));
    }
    let values = couplings.resolve(n - 1)?;
    let edges = (0..n - 1).zip(values).map(|(i, j)| Edge::new(i, i + 1, j)).collect();
    let coords = (0..n as i64).map(|i| (0, i)).collect();
    QubitGraph::new(n, edges, Geometry::Chain, Some(coords))
}

/// `rows × cols` grid with nearest-neighbour edges.
pub fn build_square(rows: usize, cols: usize, couplings: &CouplingAssignment) -> Result<QubitGraph> {
    if rows == 0 || cols == 0 || rows * cols < 2 {
        return Err(Error::InvalidDimensions(format!("square lattice needs at least 2 qubits, got {rows}x{cols}")));
    }
    let mut vertices = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for r in 0..rows as i64 {
        for c in 0..cols as i64 {
            vertices.insert((r, c));
            if c + 1 < cols as i64 {
                edges.insert(((r, c), (r, c + 1)));
            }
            if r + 1 < rows as i64 {
                edges.insert(((r, c), (r + 1, c)));
            }
        }
    }
    graph_from_sets(vertices, edges, Geometry::Square, couplings)
}

/// Driven subset for one time step, plus the adjacent driven pairs that
/// jointly receive a two-qubit gate.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DrivingPattern {
    /// Sorted, without duplicates.
    pub driven: Vec<usize>,
    /// The first pair keeps its given orientation (control, target); the
    /// remaining pairs are stored as `(min, max)`.
    pub gate_pairs: Vec<(usize, usize)>,
}

impl DrivingPattern {
    pub fn new(mut driven: Vec<usize>, gate_pairs: Vec<(usize, usize)>) -> Self {
        driven.sort_unstable();
        driven.dedup();
        Self { driven, gate_pairs }
    }

    pub fn is_driven(&self, q: usize) -> bool {
        self.driven.binary_search(&q).is_ok()
    }

    pub fn has_gate_pair(&self, a: usize, b: usize) -> bool {
        self.gate_pairs.iter().any(|&(p, q)| (p == a && q == b) || (p == b && q == a))
    }

    fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &q in &self.driven {
            if q < n {
                m[q] = true;
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// An undriven qubit with no driven neighbour.
    IsolatedUndriven(usize),
    /// A coupling with no driven endpoint; its evolution cannot be undone.
    UncoveredEdge(usize, usize),
    /// Adjacent driven qubits that are not a declared gate pair.
    AdjacentDriven(usize, usize),
    /// A declared gate pair that is not an edge or has an undriven end.
    MalformedGatePair(usize, usize),
    /// A driven index outside the graph.
    OutOfRange(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PatternReport {
    pub violations: Vec<Violation>,
}

impl PatternReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                s.push_str("; ");
            }
            s.push_str(&match v {
                Violation::IsolatedUndriven(q) => format!("undriven qubit {q} has no driven neighbour"),
                Violation::UncoveredEdge(a, b) => format!("edge ({a}, {b}) has no driven endpoint"),
                Violation::AdjacentDriven(a, b) => format!("driven qubits {a} and {b} are adjacent"),
                Violation::MalformedGatePair(a, b) => format!("gate pair ({a}, {b}) is not a driven edge"),
                Violation::OutOfRange(q) => format!("driven qubit {q} is out of range"),
            });
        }
        s
    }
}

/// Checks the conditions for a commuting decomposition. Never fails; all
/// problems are listed in the report.
pub fn validate_pattern(graph: &QubitGraph, pattern: &DrivingPattern) -> PatternReport {
    let n = graph.num_qubits();
    let mut violations = Vec::new();
    for &q in &pattern.driven {
        if q >= n {
            violations.push(Violation::OutOfRange(q));
        }
    }
    let driven = pattern.mask(n);
    for &(a, b) in &pattern.gate_pairs {
        if a >= n || b >= n || !graph.has_edge(a, b) || !driven[a] || !driven[b] {
            violations.push(Violation::MalformedGatePair(a, b));
        }
    }
    for q in 0..n {
        if !driven[q] && !graph.neighbors(q).any(|p| driven[p]) {
            violations.push(Violation::IsolatedUndriven(q));
        }
    }
    for e in graph.edges() {
        match (driven[e.a], driven[e.b]) {
            (false, false) => violations.push(Violation::UncoveredEdge(e.a, e.b)),
            (true, true) if !pattern.has_gate_pair(e.a, e.b) => {
                violations.push(Violation::AdjacentDriven(e.a, e.b))
            }
            _ => {}
        }
    }
    PatternReport { violations }
}

fn require_pattern_geometry(graph: &QubitGraph) -> Result<()> {
    match graph.geometry() {
        Geometry::Custom => Err(Error::UnsupportedGeometry("custom")),
        _ => Ok(()),
    }
}

fn checked(graph: &QubitGraph, pattern: DrivingPattern) -> Result<DrivingPattern> {
    let report = validate_pattern(graph, &pattern);
    if report.is_valid() {
        Ok(pattern)
    } else {
        Err(Error::InvalidPattern(report.summary()))
    }
}

/// Drives every qubit of one sublattice (`parity` of the coordinate sum).
pub fn sublattice_pattern(graph: &QubitGraph, parity: u8) -> Result<DrivingPattern> {
    require_pattern_geometry(graph)?;
    let driven = (0..graph.num_qubits()).filter(|&q| graph.parity(q) == Some(parity & 1)).collect();
    checked(graph, DrivingPattern::new(driven, Vec::new()))
}

fn default_parity(graph: &QubitGraph) -> u8 {
    match graph.geometry() {
        // middle of every three-qubit block
        Geometry::Chain => 1,
        Geometry::Square => 0,
        _ => {
            let even = (0..graph.num_qubits()).filter(|&q| graph.parity(q) == Some(0)).count();
            if 2 * even >= graph.num_qubits() {
                0
            } else {
                1
            }
        }
    }
}

/// The alternating pattern for single-qubit steps: one bipartite sublattice
/// is driven, giving one-center star blocks (4 qubits on the honeycomb,
/// 3 on chains, 5 on square arrays). On the honeycomb the larger sublattice
/// is chosen.
pub fn single_qubit_pattern(graph: &QubitGraph) -> Result<DrivingPattern> {
    require_pattern_geometry(graph)?;
    sublattice_pattern(graph, default_parity(graph))
}

/// Both sublattice patterns, the default one first.
pub fn single_qubit_pattern_variants(graph: &QubitGraph) -> Result<Vec<DrivingPattern>> {
    require_pattern_geometry(graph)?;
    let p = default_parity(graph);
    Ok(vec![sublattice_pattern(graph, p)?, sublattice_pattern(graph, 1 - p)?])
}

/// Orientation class of a honeycomb edge: 0 for rungs, 1 and 2 for the two
/// horizontal classes.
fn honeycomb_edge_class(coords: &[(i64, i64)], a: usize, b: usize) -> u8 {
    let (ra, xa) = coords[a];
    let (_, xb) = coords[b];
    if xa == xb {
        0
    } else if (xa.min(xb) - ra).rem_euclid(2) == 0 {
        1
    } else {
        2
    }
}

/// Components of the graph restricted to edges accepted by `keep`.
fn components(graph: &QubitGraph, keep: impl Fn(usize) -> bool) -> Vec<usize> {
    let n = graph.num_qubits();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(q) = queue.pop_front() {
            for &(p, id) in graph.incident(q) {
                if keep(id) && label[p] == usize::MAX {
                    label[p] = next;
                    queue.push_back(p);
                }
            }
        }
        next += 1;
    }
    label
}

/// Pattern for a two-qubit gate on `target_pair`.
///
/// Honeycomb and chain: all edges parallel to the target pair that join the
/// same two zigzag chains become driven pairs, so that strip is tiled by
/// two-center blocks (six qubits in the bulk); the two sides of the strip
/// keep the alternating pattern, each on the sublattice of its strip
/// endpoint. Square: the target's first qubit and its four neighbours are
/// driven (a thirteen-qubit block), and outside that diamond the opposite
/// checkerboard is driven.
pub fn two_qubit_pattern(graph: &QubitGraph, target_pair: (usize, usize)) -> Result<DrivingPattern> {
    require_pattern_geometry(graph)?;
    let (a, b) = target_pair;
    let n = graph.num_qubits();
    if a >= n || b >= n || !graph.has_edge(a, b) {
        return Err(Error::NotAnEdge(a, b));
    }
    let coords = graph.coords().expect("validated geometry carries coordinates");
    match graph.geometry() {
        Geometry::Square => {
            let (ra, ca) = coords[a];
            let dist = |q: usize| (coords[q].0 - ra).abs() + (coords[q].1 - ca).abs();
            let driven = (0..n).filter(|&q| dist(q) <= 1 || (dist(q) >= 3 && dist(q) % 2 == 1)).collect();
            let mut pairs = vec![(a, b)];
            for p in graph.neighbors(a) {
                if p != b {
                    pairs.push((a.min(p), a.max(p)));
                }
            }
            checked(graph, DrivingPattern::new(driven, pairs))
        }
        _ => {
            let class_of = |id: usize| -> u8 {
                let e = graph.edges()[id];
                match graph.geometry() {
                    Geometry::Honeycomb => honeycomb_edge_class(coords, e.a, e.b),
                    _ => 0,
                }
            };
            let target_class = class_of(graph.edge_index(a, b).expect("checked above"));
            let chain = components(graph, |id| class_of(id) != target_class);
            let (ca, cb) = (chain[a], chain[b]);
            let is_strip = |id: usize| {
                let e = graph.edges()[id];
                class_of(id) == target_class
                    && ((chain[e.a] == ca && chain[e.b] == cb) || (chain[e.a] == cb && chain[e.b] == ca))
            };
            let side = components(graph, |id| !is_strip(id));
            if side[a] == side[b] {
                return Err(Error::InvalidPattern(format!(
                    "pair ({a}, {b}) does not separate the patch into two sides"
                )));
            }
            let (pa, pb) = (graph.parity(a), graph.parity(b));
            let driven = (0..n)
                .filter(|&q| if side[q] == side[a] { graph.parity(q) == pa } else { graph.parity(q) == pb })
                .collect::<Vec<_>>();
            let pattern_mask = {
                let mut m = vec![false; n];
                for &q in &driven {
                    m[q] = true;
                }
                m
            };
            let mut pairs = vec![(a, b)];
            for (id, e) in graph.edges().iter().enumerate() {
                let same = (e.a == a && e.b == b) || (e.a == b && e.b == a);
                if !same && is_strip(id) && pattern_mask[e.a] && pattern_mask[e.b] {
                    pairs.push((e.a.min(e.b), e.a.max(e.b)));
                }
            }
            checked(graph, DrivingPattern::new(driven, pairs))
        }
    }
}

/// One ZZ term of a block, in block-local qubit indices (`a < b`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockCoupling {
    pub a: usize,
    pub b: usize,
    pub coupling: f64,
}

/// A star graph: driven center plus undriven boundary.
///
/// Local qubit order is the center (gate-pair order first) followed by the
/// boundary in ascending global index; local qubit 0 is the most
/// significant bit of the block basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    center: Vec<usize>,
    boundary: Vec<usize>,
    couplings: Vec<BlockCoupling>,
    edge_ids: Vec<Option<usize>>,
}

impl Block {
    /// A standalone block with local indices `0..center_len` for the
    /// center and `center_len..` for the boundary. Global indices equal the
    /// local ones.
    pub fn new(center_len: usize, boundary_len: usize, couplings: Vec<BlockCoupling>) -> Result<Self> {
        let n = center_len + boundary_len;
        if center_len == 0 {
            return Err(Error::InvalidGraph("a block needs at least one driven qubit".into()));
        }
        if n > MAX_BLOCK_QUBITS {
            return Err(Error::TooManyQubits { num_qubits: n, limit: MAX_BLOCK_QUBITS });
        }
        let mut adjacent = vec![false; n];
        let mut normalized = Vec::with_capacity(couplings.len());
        for c in couplings {
            if c.a >= n || c.b >= n || c.a == c.b {
                return Err(Error::InvalidGraph(format!("bad block coupling ({}, {})", c.a, c.b)));
            }
            if c.a >= center_len && c.b >= center_len {
                return Err(Error::InvalidGraph(format!(
                    "coupling ({}, {}) joins two boundary qubits",
                    c.a, c.b
                )));
            }
            if !c.coupling.is_finite() {
                return Err(Error::InvalidGraph("non-finite coupling".into()));
            }
            adjacent[c.a] = true;
            adjacent[c.b] = true;
            normalized.push(BlockCoupling { a: c.a.min(c.b), b: c.a.max(c.b), coupling: c.coupling });
        }
        if let Some(q) = (center_len..n).find(|&q| !adjacent[q]) {
            return Err(Error::InvalidGraph(format!("boundary qubit {q} is not coupled to the center")));
        }
        let edge_ids = vec![None; normalized.len()];
        Ok(Self {
            center: (0..center_len).collect(),
            boundary: (center_len..n).collect(),
            couplings: normalized,
            edge_ids,
        })
    }

    /// Star with one center and `couplings.len()` boundary qubits.
    pub fn star(couplings: &[f64]) -> Result<Self> {
        let c = couplings
            .iter()
            .enumerate()
            .map(|(i, &j)| BlockCoupling { a: 0, b: i + 1, coupling: j })
            .collect();
        Self::new(1, couplings.len(), c)
    }

    /// Global indices of the driven center.
    pub fn center(&self) -> &[usize] {
        &self.center
    }

    /// Global indices of the undriven boundary.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn couplings(&self) -> &[BlockCoupling] {
        &self.couplings
    }

    /// Graph edge index of each coupling, when the block came from a graph.
    pub fn edge_ids(&self) -> &[Option<usize>] {
        &self.edge_ids
    }

    pub fn num_qubits(&self) -> usize {
        self.center.len() + self.boundary.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits()
    }

    /// Global qubit of each local index.
    pub fn global_qubits(&self) -> Vec<usize> {
        self.center.iter().chain(&self.boundary).copied().collect()
    }

    pub fn contains(&self, q: usize) -> bool {
        self.center.contains(&q) || self.boundary.contains(&q)
    }

    pub fn smallest_member(&self) -> usize {
        self.global_qubits().into_iter().min().unwrap_or(usize::MAX)
    }
}

/// Splits the driven array into commuting blocks: each connected driven
/// component (connected through gate pairs) together with its undriven
/// neighbours. Blocks are returned in ascending order of their smallest
/// member.
pub fn decompose_blocks(graph: &QubitGraph, pattern: &DrivingPattern) -> Result<Vec<Block>> {
    let report = validate_pattern(graph, pattern);
    if !report.is_valid() {
        return Err(Error::InvalidPattern(report.summary()));
    }
    let n = graph.num_qubits();
    let driven = pattern.mask(n);
    let label = components(graph, |id| {
        let e = graph.edges()[id];
        driven[e.a] && driven[e.b]
    });
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for q in 0..n {
        if driven[q] {
            groups.entry(label[q]).or_default().push(q);
        }
    }
    let mut blocks = Vec::with_capacity(groups.len());
    for (_, members) in groups {
        let mut center = Vec::with_capacity(members.len());
        if let Some(&(a, b)) = pattern.gate_pairs.iter().find(|&&(a, _)| members.contains(&a)) {
            center.push(a);
            center.push(b);
        }
        for &q in &members {
            if !center.contains(&q) {
                center.push(q);
            }
        }
        let boundary: Vec<usize> = members
            .iter()
            .flat_map(|&q| graph.neighbors(q))
            .filter(|&p| !driven[p])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let size = center.len() + boundary.len();
        if size > MAX_BLOCK_QUBITS {
            return Err(Error::TooManyQubits { num_qubits: size, limit: MAX_BLOCK_QUBITS });
        }
        let local = |q: usize| -> usize {
            center
                .iter()
                .position(|&c| c == q)
                .unwrap_or_else(|| center.len() + boundary.iter().position(|&x| x == q).expect("member"))
        };
        let mut couplings = Vec::new();
        let mut edge_ids = Vec::new();
        for (id, e) in graph.edges().iter().enumerate() {
            if driven[e.a] && label[e.a] == label[members[0]] || driven[e.b] && label[e.b] == label[members[0]] {
                let (la, lb) = (local(e.a), local(e.b));
                couplings.push(BlockCoupling { a: la.min(lb), b: la.max(lb), coupling: e.coupling });
                edge_ids.push(Some(id));
            }
        }
        blocks.push(Block { center, boundary, couplings, edge_ids });
    }
    blocks.sort_by_key(Block::smallest_member);
    Ok(blocks)
}

/// Reference blocks used by the CLI and the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Four-qubit honeycomb star (one center, three boundary).
    HoneycombSingle,
    /// Six-qubit honeycomb block (driven pair, four boundary).
    HoneycombPair,
    /// Three-qubit chain block.
    ChainSingle,
    /// Four-qubit chain block.
    ChainPair,
    /// Five-qubit square-array block.
    SquareSingle,
    /// Thirteen-qubit square-array block.
    SquarePair,
}

impl BlockKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "honeycomb-1q" => Some(BlockKind::HoneycombSingle),
            "honeycomb-2q" => Some(BlockKind::HoneycombPair),
            "chain-1q" => Some(BlockKind::ChainSingle),
            "chain-2q" => Some(BlockKind::ChainPair),
            "square-1q" => Some(BlockKind::SquareSingle),
            "square-2q" => Some(BlockKind::SquarePair),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BlockKind::HoneycombSingle => "honeycomb-1q",
            BlockKind::HoneycombPair => "honeycomb-2q",
            BlockKind::ChainSingle => "chain-1q",
            BlockKind::ChainPair => "chain-2q",
            BlockKind::SquareSingle => "square-1q",
            BlockKind::SquarePair => "square-2q",
        }
    }

    /// Number of qubits of the bulk block.
    pub fn block_size(self) -> usize {
        match self {
            BlockKind::HoneycombSingle => 4,
            BlockKind::HoneycombPair => 6,
            BlockKind::ChainSingle => 3,
            BlockKind::ChainPair => 4,
            BlockKind::SquareSingle => 5,
            BlockKind::SquarePair => 13,
        }
    }
}

/// Cuts the bulk block of the given kind out of a generated patch with
/// uniform coupling `coupling`.
pub fn canonical_block(kind: BlockKind, coupling: f64) -> Result<Block> {
    let j = CouplingAssignment::Uniform(coupling);
    let (graph, pattern) = match kind {
        BlockKind::HoneycombSingle => {
            let g = build_honeycomb(3, 3, &j)?;
            let p = single_qubit_pattern(&g)?;
            (g, p)
        }
        BlockKind::HoneycombPair => {
            let g = build_honeycomb(3, 3, &j)?;
            let coords = g.coords().expect("honeycomb coordinates");
            let a = (0..g.num_qubits())
                .find(|&q| coords[q] == (1, 3))
                .expect("interior vertex of a 3x3 patch");
            let b = (0..g.num_qubits()).find(|&q| coords[q] == (2, 3)).expect("rung partner");
            let p = two_qubit_pattern(&g, (a, b))?;
            (g, p)
        }
        BlockKind::ChainSingle => {
            let g = build_chain(5, &j)?;
            let p = single_qubit_pattern(&g)?;
            (g, p)
        }
        BlockKind::ChainPair => {
            let g = build_chain(6, &j)?;
            let p = two_qubit_pattern(&g, (2, 3))?;
            (g, p)
        }
        BlockKind::SquareSingle => {
            let g = build_square(5, 5, &j)?;
            let p = single_qubit_pattern(&g)?;
            (g, p)
        }
        BlockKind::SquarePair => {
            let g = build_square(5, 5, &j)?;
            let p = two_qubit_pattern(&g, (12, 13))?;
            (g, p)
        }
    };
    let want_center = if matches!(kind, BlockKind::HoneycombSingle | BlockKind::ChainSingle | BlockKind::SquareSingle) {
        1
    } else if kind == BlockKind::SquarePair {
        5
    } else {
        2
    };
    let blocks = decompose_blocks(&graph, &pattern)?;
    let found = blocks
        .into_iter()
        .find(|b| b.num_qubits() == kind.block_size() && b.center().len() == want_center)
        .ok_or_else(|| Error::InvalidPattern(format!("no bulk block of kind {}", kind.as_str())))?;
    // Renumber to a standalone block so local == global.
    Block::new(found.center.len(), found.boundary.len(), found.couplings.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> CouplingAssignment {
        CouplingAssignment::Uniform(1.0)
    }

    #[test]
    fn single_hexagon() {
        let g = build_honeycomb(1, 1, &unit()).unwrap();
        assert_eq!(g.num_qubits(), 6);
        assert_eq!(g.edges().len(), 6);
        assert!((0..6).all(|q| g.degree(q) == 2));
    }

    #[test]
    fn honeycomb_interior_degree_is_three() {
        let g = build_honeycomb(4, 4, &unit()).unwrap();
        let coords = g.coords().unwrap();
        // rows 1..=3 with both horizontal neighbours are interior
        for q in 0..g.num_qubits() {
            let (r, x) = coords[q];
            if (1..=3).contains(&r) && (1..=8).contains(&x) {
                assert_eq!(g.degree(q), 3, "vertex {q} at {:?}", coords[q]);
            }
        }
    }

    #[test]
    fn zero_dimensions_rejected() {
        assert!(matches!(build_honeycomb(0, 2, &unit()), Err(Error::InvalidDimensions(_))));
        assert!(matches!(build_chain(1, &unit()), Err(Error::InvalidDimensions(_))));
        assert!(matches!(build_square(1, 1, &unit()), Err(Error::InvalidDimensions(_))));
    }

    #[test]
    fn chain_and_square_edges() {
        let c = build_chain(3, &unit()).unwrap();
        let pairs: Vec<_> = c.edges().iter().map(|e| (e.a, e.b)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
        let s = build_square(2, 2, &unit()).unwrap();
        assert_eq!((s.num_qubits(), s.edges().len()), (4, 4));
        let s = build_square(3, 3, &unit()).unwrap();
        // 2rc − r − c
        assert_eq!((s.num_qubits(), s.edges().len()), (9, 12));
    }

    #[test]
    fn graph_invariants_enforced() {
        let dup = QubitGraph::new(2, vec![Edge::new(0, 1, 1.0), Edge::new(1, 0, 1.0)], Geometry::Custom, None);
        assert!(dup.is_err());
        let zero = QubitGraph::new(2, vec![Edge::new(0, 1, 0.0)], Geometry::Custom, None);
        assert!(zero.is_err());
        let nan = QubitGraph::new(2, vec![Edge::new(0, 1, f64::NAN)], Geometry::Custom, None);
        assert!(nan.is_err());
        let star = (1..5).map(|i| Edge::new(0, i, 1.0)).collect();
        let coords = (0..5).map(|i| (0, i)).collect();
        assert!(QubitGraph::new(5, star, Geometry::Chain, Some(coords)).is_err());
    }

    #[test]
    fn chain_patterns() {
        let c = build_chain(3, &unit()).unwrap();
        assert_eq!(single_qubit_pattern(&c).unwrap().driven, vec![1]);
        let c4 = build_chain(4, &unit()).unwrap();
        let p = two_qubit_pattern(&c4, (1, 2)).unwrap();
        assert_eq!(p.driven, vec![1, 2]);
        let blocks = decompose_blocks(&c4, &p).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].num_qubits(), 4);
        assert_eq!(blocks[0].center(), &[1, 2]);
    }

    #[test]
    fn empty_pattern_on_chain_reports_everything() {
        let c = build_chain(4, &unit()).unwrap();
        let r = validate_pattern(&c, &DrivingPattern::default());
        let isolated = r.violations.iter().filter(|v| matches!(v, Violation::IsolatedUndriven(_))).count();
        let uncovered = r.violations.iter().filter(|v| matches!(v, Violation::UncoveredEdge(..))).count();
        assert_eq!((isolated, uncovered), (4, 3));
    }

    #[test]
    fn adjacent_driven_without_gate_pair() {
        let g = build_honeycomb(2, 2, &unit()).unwrap();
        let mut p = single_qubit_pattern(&g).unwrap();
        let e = g.edges()[0];
        let extra = if p.is_driven(e.a) { e.b } else { e.a };
        p.driven.push(extra);
        p.driven.sort_unstable();
        let r = validate_pattern(&g, &p);
        let adjacent = r.violations.iter().filter(|v| matches!(v, Violation::AdjacentDriven(..))).count();
        assert!(adjacent >= 1);
    }

    #[test]
    fn custom_geometry_needs_explicit_pattern() {
        let g = QubitGraph::new(2, vec![Edge::new(0, 1, 1.0)], Geometry::Custom, None).unwrap();
        assert_eq!(single_qubit_pattern(&g), Err(Error::UnsupportedGeometry("custom")));
    }

    #[test]
    fn two_qubit_pattern_requires_edge() {
        let c = build_chain(4, &unit()).unwrap();
        assert_eq!(two_qubit_pattern(&c, (0, 2)), Err(Error::NotAnEdge(0, 2)));
    }

    #[test]
    fn canonical_blocks_have_expected_shape() {
        for kind in [
            BlockKind::HoneycombSingle,
            BlockKind::HoneycombPair,
            BlockKind::ChainSingle,
            BlockKind::ChainPair,
            BlockKind::SquareSingle,
            BlockKind::SquarePair,
        ] {
            let b = canonical_block(kind, 1.0).unwrap();
            assert_eq!(b.num_qubits(), kind.block_size(), "{}", kind.as_str());
        }
        let pair = canonical_block(BlockKind::HoneycombPair, 1.0).unwrap();
        assert_eq!(pair.couplings().len(), 5);
    }
}
