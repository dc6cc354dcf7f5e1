//! Bare-frequency recovery from one- and two-photon absorption peaks.
//!
//! With every qubit in `|0⟩` and the diagonal Hamiltonian
//! `−Σ ω_j Z_j/2 + Σ J_jk Z_j Z_k`, flipping qubit `j` costs
//! `ω_j − 2 Σ_{k∈NB_j} J_jk`; flipping the target `1` together with a
//! neighbour `j` leaves the `1–j` bond unchanged. Combining the four
//! one-photon peaks of a degree-3 target and its neighbours with the three
//! two-photon peaks cancels every dispersive shift:
//!
//! ```text
//! ω_1 = Σ_{j=2..4} ω^p_{1j} − ½ Σ_{j=1..4} ω^p_j
//! ```

use alloc::vec::Vec;

use rand::Rng;

use crate::lattice::{Edge, Geometry, QubitGraph};
use crate::{Error, Result};

/// Size guard for [`oracle_peaks`], which enumerates the full diagonal.
pub const MAX_CLUSTER_QUBITS: usize = 14;

/// A degree-3 target, its three neighbours and the fringe qubits coupled
/// to those neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectroscopyCluster {
    graph: QubitGraph,
    frequencies: Vec<f64>,
    target: usize,
    neighbors: [usize; 3],
    labels: Vec<usize>,
}

impl SpectroscopyCluster {
    /// `frequencies` has one entry per qubit of `graph`. Fringe
    /// frequencies do not enter the peak formulas but are used by the
    /// oracle.
    pub fn new(graph: QubitGraph, frequencies: Vec<f64>, target: usize) -> Result<Self> {
        let n = graph.num_qubits();
        let labels = (0..n).collect();
        Self::build(graph, frequencies, target, labels)
    }

    /// Extracts the target, its neighbours and their neighbours from a
    /// larger array. `frequencies` is indexed by the array's qubits.
    pub fn from_graph(graph: &QubitGraph, frequencies: &[f64], target: usize) -> Result<Self> {
        if frequencies.len() != graph.num_qubits() {
            return Err(Error::DimensionMismatch { expected: graph.num_qubits(), actual: frequencies.len() });
        }
        if target >= graph.num_qubits() {
            return Err(Error::QubitOutOfRange { index: target, num_qubits: graph.num_qubits() });
        }
        let mut keep = alloc::vec![target];
        for k in graph.neighbors(target) {
            keep.push(k);
            keep.extend(graph.neighbors(k));
        }
        keep.sort_unstable();
        keep.dedup();
        let sub = graph.induced_subgraph(&keep)?;
        let sub = QubitGraph::new(sub.num_qubits(), sub.edges().to_vec(), Geometry::Custom, None)?;
        let local_target = keep.binary_search(&target).expect("target kept");
        let f = keep.iter().map(|&q| frequencies[q]).collect();
        Self::build(sub, f, local_target, keep)
    }

    fn build(graph: QubitGraph, frequencies: Vec<f64>, target: usize, labels: Vec<usize>) -> Result<Self> {
        let n = graph.num_qubits();
        if frequencies.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: frequencies.len() });
        }
        if target >= n {
            return Err(Error::QubitOutOfRange { index: target, num_qubits: n });
        }
        if frequencies.iter().any(|w| !w.is_finite()) || graph.edges().iter().any(|e| !e.coupling.is_finite()) {
            return Err(Error::InvalidCluster("frequencies and couplings must be finite".into()));
        }
        let mut nb: Vec<usize> = graph.neighbors(target).collect();
        if nb.len() != 3 {
            return Err(Error::InvalidCluster(alloc::format!(
                "target qubit {} has degree {}, the recovery formula needs 3",
                labels[target],
                nb.len()
            )));
        }
        nb.sort_unstable();
        Ok(Self { graph, frequencies, target, neighbors: [nb[0], nb[1], nb[2]], labels })
    }

    pub fn graph(&self) -> &QubitGraph {
        &self.graph
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Local index of the target.
    pub fn target(&self) -> usize {
        self.target
    }

    /// Local indices of the neighbours, ascending (labelled 2, 3, 4).
    pub fn neighbors(&self) -> [usize; 3] {
        self.neighbors
    }

    /// Qubit index in the originating array for each local index.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// The true bare frequency of the target.
    pub fn target_frequency(&self) -> f64 {
        self.frequencies[self.target]
    }

    fn coupling_sum(&self, q: usize, skip: Option<usize>) -> f64 {
        self.graph
            .edges()
            .iter()
            .filter(|e| e.touches(q) && skip.is_none_or(|s| !e.touches(s)))
            .map(|e| e.coupling)
            .sum()
    }

    /// Qubits 1..4 of the cluster in formula order.
    fn numbered(&self) -> [usize; 4] {
        [self.target, self.neighbors[0], self.neighbors[1], self.neighbors[2]]
    }
}

/// Bulk honeycomb cluster: target `0`, neighbours `1..=3`, and fringe
/// qubits `4 + 2(j−1)` and `5 + 2(j−1)` on neighbour `j`. `couplings`
/// lists the three target bonds, then the six fringe bonds in that order.
pub fn unit_cell_cluster(frequencies: [f64; 10], couplings: [f64; 9]) -> Result<SpectroscopyCluster> {
    let mut edges = Vec::with_capacity(9);
    for j in 1..=3 {
        edges.push(Edge::new(0, j, couplings[j - 1]));
    }
    for j in 1..=3 {
        for f in 0..2 {
            edges.push(Edge::new(j, 4 + 2 * (j - 1) + f, couplings[3 + 2 * (j - 1) + f]));
        }
    }
    let graph = QubitGraph::new(10, edges, Geometry::Custom, None)?;
    SpectroscopyCluster::new(graph, frequencies.to_vec(), 0)
}

/// A unit-cell cluster with frequencies uniform in `[50, 150]` and
/// couplings uniform in `[0.5, 1.5]` (units of `J̄`).
pub fn random_unit_cell_cluster<R: Rng>(rng: &mut R) -> SpectroscopyCluster {
    let frequencies = core::array::from_fn(|_| rng.gen_range(50.0..150.0));
    let couplings = core::array::from_fn(|_| rng.gen_range(0.5..1.5));
    unit_cell_cluster(frequencies, couplings).expect("unit cell is a valid cluster")
}

/// Peak positions: `ω^p_j` for `j = 1..4` and `ω^p_{1j}` for `j = 2..4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakSet {
    pub one_photon: [f64; 4],
    pub two_photon: [f64; 3],
}

/// `ω^p_j = ω_j − 2 Σ_{k∈NB_j} J_jk` for the target and its neighbours.
pub fn predict_one_photon_peaks(cluster: &SpectroscopyCluster) -> [f64; 4] {
    cluster.numbered().map(|q| cluster.frequencies[q] - 2.0 * cluster.coupling_sum(q, None))
}

/// `ω^p_{1j}`, half the energy of the simultaneous flip of the target and
/// neighbour `j`, whose shared bond is unchanged.
pub fn predict_two_photon_peaks(cluster: &SpectroscopyCluster) -> [f64; 3] {
    let t = cluster.target;
    cluster.neighbors.map(|j| {
        let two = cluster.frequencies[t] + cluster.frequencies[j]
            - 2.0 * cluster.coupling_sum(t, Some(j))
            - 2.0 * cluster.coupling_sum(j, Some(t));
        two / 2.0
    })
}

pub fn predict_peaks(cluster: &SpectroscopyCluster) -> PeakSet {
    PeakSet { one_photon: predict_one_photon_peaks(cluster), two_photon: predict_two_photon_peaks(cluster) }
}

/// `Σ_{j=2..4} ω^p_{1j} − ½ Σ_{j=1..4} ω^p_j`.
pub fn recover_frequency(peaks: &PeakSet) -> f64 {
    peaks.two_photon.iter().sum::<f64>() - 0.5 * peaks.one_photon.iter().sum::<f64>()
}

fn diagonal_energies(n: usize, frequencies: &[f64], edges: &[Edge]) -> Vec<f64> {
    let z = |idx: usize, q: usize| if idx >> (n - 1 - q) & 1 == 1 { -1.0 } else { 1.0 };
    (0..1usize << n)
        .map(|idx| {
            let field: f64 = (0..n).map(|q| -frequencies[q] / 2.0 * z(idx, q)).sum();
            let zz: f64 = edges.iter().map(|e| e.coupling * z(idx, e.a) * z(idx, e.b)).sum();
            field + zz
        })
        .collect()
}

/// Peaks read off as energy differences of the full diagonal Hamiltonian
/// of the cluster.
pub fn oracle_peaks(cluster: &SpectroscopyCluster) -> Result<PeakSet> {
    let n = cluster.graph.num_qubits();
    if n > MAX_CLUSTER_QUBITS {
        return Err(Error::TooManyQubits { num_qubits: n, limit: MAX_CLUSTER_QUBITS });
    }
    let energies = diagonal_energies(n, &cluster.frequencies, cluster.graph.edges());
    let bit = |q: usize| 1usize << (n - 1 - q);
    let ground = energies[0];
    let t = cluster.target;
    Ok(PeakSet {
        one_photon: cluster.numbered().map(|q| energies[bit(q)] - ground),
        two_photon: cluster.neighbors.map(|j| (energies[bit(t) | bit(j)] - ground) / 2.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn star(j: [f64; 3], w: [f64; 4]) -> SpectroscopyCluster {
        let edges = (0..3).map(|k| Edge::new(0, k + 1, j[k])).collect();
        let g = QubitGraph::new(4, edges, Geometry::Custom, None).unwrap();
        SpectroscopyCluster::new(g, w.to_vec(), 0).unwrap()
    }

    #[test]
    fn bare_star_peaks() {
        let c = star([1.0; 3], [100.0, 90.0, 80.0, 70.0]);
        let p = predict_peaks(&c);
        assert_eq!(p.one_photon[0], 94.0);
        assert_eq!(p.one_photon[1], 88.0);
        assert_eq!(p.two_photon[0] * 2.0, 100.0 + 90.0 - 4.0);
        assert_eq!(oracle_peaks(&c).unwrap(), p);
        assert_eq!(recover_frequency(&p), 100.0);
    }

    #[test]
    fn rejects_wrong_degree() {
        let g = QubitGraph::new(3, vec![Edge::new(0, 1, 1.0), Edge::new(0, 2, 1.0)], Geometry::Custom, None).unwrap();
        assert!(matches!(SpectroscopyCluster::new(g, vec![1.0; 3], 0), Err(Error::InvalidCluster(_))));
    }

    #[test]
    fn extracts_from_array() {
        use crate::lattice::{build_honeycomb, CouplingAssignment};
        let g = build_honeycomb(2, 2, &CouplingAssignment::Uniform(1.0)).unwrap();
        let t = (0..g.num_qubits()).find(|&q| g.degree(q) == 3).unwrap();
        let w: Vec<f64> = (0..g.num_qubits()).map(|q| 50.0 + q as f64).collect();
        let c = SpectroscopyCluster::from_graph(&g, &w, t).unwrap();
        assert_eq!(c.labels()[c.target()], t);
        assert_eq!(c.target_frequency(), w[t]);
        let p = oracle_peaks(&c).unwrap();
        assert!((recover_frequency(&p) - w[t]).abs() < 1e-12 * w[t]);
    }
}
