use std::collections::BTreeSet;

use proptest::prelude::*;
use zzarray_core::lattice::*;

type Coord = (i64, i64);

/// Hexagons listed cell by cell: top path on row `i`, bottom path on row
/// `i + 1`, both over columns `x0..=x0+2`, with rungs at `x0` and `x0 + 2`.
fn hand_enumerated_honeycomb(rows: usize, cols: usize) -> (BTreeSet<Coord>, BTreeSet<(Coord, Coord)>) {
    let mut v = BTreeSet::new();
    let mut e = BTreeSet::new();
    for i in 0..rows as i64 {
        for k in 0..cols as i64 {
            let x0 = 2 * k + i % 2;
            for r in [i, i + 1] {
                for x in x0..=x0 + 2 {
                    v.insert((r, x));
                }
                for x in x0..x0 + 2 {
                    e.insert(((r, x), (r, x + 1)));
                }
            }
            e.insert(((i, x0), (i + 1, x0)));
            e.insert(((i, x0 + 2), (i + 1, x0 + 2)));
        }
    }
    (v, e)
}

fn coord_edges(g: &QubitGraph) -> BTreeSet<(Coord, Coord)> {
    let c = g.coords().unwrap();
    g.edges().iter().map(|e| (c[e.a].min(c[e.b]), c[e.a].max(c[e.b]))).collect()
}

fn uniform() -> CouplingAssignment {
    CouplingAssignment::Uniform(1.0)
}

/// Every driven-incident edge lies in exactly one block, and blocks meet
/// only in boundary qubits.
fn check_decomposition(g: &QubitGraph, p: &DrivingPattern) {
    let blocks = decompose_blocks(g, p).unwrap();
    let driven: BTreeSet<usize> = p.driven.iter().copied().collect();
    let mut covered = vec![0usize; g.edges().len()];
    for b in &blocks {
        let global = b.global_qubits();
        for c in b.couplings() {
            let idx = g.edge_index(global[c.a], global[c.b]).expect("block coupling is a graph edge");
            covered[idx] += 1;
        }
        for other in &blocks {
            if std::ptr::eq(b, other) {
                continue;
            }
            for &q in b.center() {
                assert!(!other.contains(q), "driven qubit {q} appears in two blocks");
            }
        }
    }
    for (idx, e) in g.edges().iter().enumerate() {
        if driven.contains(&e.a) || driven.contains(&e.b) {
            assert_eq!(covered[idx], 1, "edge ({}, {}) covered {} times", e.a, e.b, covered[idx]);
        }
    }
}

#[test]
fn honeycomb_matches_hand_enumeration() {
    for (rows, cols) in [(1, 1), (2, 3), (3, 2), (4, 4)] {
        let g = build_honeycomb(rows, cols, &uniform()).unwrap();
        let (v, e) = hand_enumerated_honeycomb(rows, cols);
        let coords: BTreeSet<Coord> = g.coords().unwrap().iter().copied().collect();
        assert_eq!(coords, v);
        assert_eq!(coord_edges(&g), e);
    }
    let g = build_honeycomb(2, 3, &uniform()).unwrap();
    assert_eq!((g.num_qubits(), g.edges().len()), (22, 27));
    let hex = build_honeycomb(1, 1, &uniform()).unwrap();
    assert_eq!((hex.num_qubits(), hex.edges().len()), (6, 6));
    assert!((0..6).all(|q| hex.degree(q) == 2));
}

#[test]
fn square_and_chain_counts() {
    let s = build_square(3, 3, &uniform()).unwrap();
    assert_eq!((s.num_qubits(), s.edges().len()), (9, 2 * 3 * 3 - 3 - 3));
    let s = build_square(2, 2, &uniform()).unwrap();
    assert_eq!((s.num_qubits(), s.edges().len()), (4, 4));
    let c = build_chain(3, &uniform()).unwrap();
    let pairs: Vec<(usize, usize)> = c.edges().iter().map(|e| (e.a, e.b)).collect();
    assert_eq!(pairs, [(0, 1), (1, 2)]);
}

#[test]
fn bulk_single_qubit_pattern_is_one_sublattice() {
    let g = build_honeycomb(4, 4, &uniform()).unwrap();
    let p = single_qubit_pattern(&g).unwrap();
    assert_eq!(p.driven.len() * 2, g.num_qubits());
    let c = g.coords().unwrap();
    let parity: BTreeSet<i64> = p.driven.iter().map(|&q| (c[q].0 + c[q].1).rem_euclid(2)).collect();
    assert_eq!(parity.len(), 1);
    for b in decompose_blocks(&g, &p).unwrap() {
        assert_eq!(b.center().len(), 1);
        assert!(b.boundary().len() <= 3);
    }
    assert!(validate_pattern(&g, &p).is_valid());
}

#[test]
fn chain_and_square_single_patterns() {
    let c = build_chain(3, &uniform()).unwrap();
    let p = single_qubit_pattern(&c).unwrap();
    assert_eq!(p.driven, [1]);
    let blocks = decompose_blocks(&c, &p).unwrap();
    assert_eq!(blocks.len(), 1);
    assert_eq!(blocks[0].num_qubits(), 3);

    let s = build_square(3, 3, &uniform()).unwrap();
    let p = single_qubit_pattern(&s).unwrap();
    for q in 0..9 {
        if !p.is_driven(q) {
            assert!(s.neighbors(q).any(|k| p.is_driven(k)), "undriven {q} has no driven neighbour");
        }
    }
    assert!(validate_pattern(&s, &p).is_valid());
}

#[test]
fn two_qubit_patterns() {
    let g = build_honeycomb(4, 4, &uniform()).unwrap();
    let c = g.coords().unwrap();
    let a = c.iter().position(|&x| x == (2, 4)).unwrap();
    let b = c.iter().position(|&x| x == (2, 5)).unwrap();
    let p = two_qubit_pattern(&g, (a, b)).unwrap();
    assert_eq!(p.gate_pairs[0], (a, b));
    assert!(validate_pattern(&g, &p).is_valid());
    let blocks = decompose_blocks(&g, &p).unwrap();
    let target = blocks.iter().find(|bl| bl.center().contains(&a)).unwrap();
    assert_eq!(target.center(), [a, b]);
    assert_eq!(target.num_qubits(), 6);
    assert_eq!(blocks.iter().filter(|bl| bl.center().len() == 2).count(), p.gate_pairs.len());
    for bl in &blocks {
        assert!(bl.num_qubits() <= if bl.center().len() == 1 { 4 } else { 6 });
    }
    check_decomposition(&g, &p);

    let chain = build_chain(4, &uniform()).unwrap();
    let p = two_qubit_pattern(&chain, (1, 2)).unwrap();
    assert_eq!(p.driven, [1, 2]);
    let blocks = decompose_blocks(&chain, &p).unwrap();
    assert_eq!(blocks.len(), 1);
    assert_eq!(blocks[0].num_qubits(), 4);

    let sq = build_square(5, 5, &uniform()).unwrap();
    let p = two_qubit_pattern(&sq, (12, 13)).unwrap();
    let blocks = decompose_blocks(&sq, &p).unwrap();
    let big = blocks.iter().find(|bl| bl.center().contains(&12)).unwrap();
    assert_eq!((big.center().len(), big.boundary().len()), (5, 8));
    assert!(matches!(two_qubit_pattern(&sq, (0, 6)), Err(zzarray_core::Error::NotAnEdge(0, 6))));
}

#[test]
fn pattern_violations() {
    let chain = build_chain(4, &uniform()).unwrap();
    let r = validate_pattern(&chain, &DrivingPattern::new(vec![], vec![]));
    let isolated = r.violations.iter().filter(|v| matches!(v, Violation::IsolatedUndriven(_))).count();
    let uncovered = r.violations.iter().filter(|v| matches!(v, Violation::UncoveredEdge(..))).count();
    assert_eq!((isolated, uncovered), (4, 3));

    let g = build_honeycomb(2, 2, &uniform()).unwrap();
    let mut p = single_qubit_pattern(&g).unwrap();
    let q = p.driven[0];
    let n = g.neighbors(q).next().unwrap();
    p = DrivingPattern::new(p.driven.iter().copied().chain([n]).collect(), vec![]);
    let r = validate_pattern(&g, &p);
    assert!(r.violations.iter().any(|v| matches!(v, Violation::AdjacentDriven(..))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn honeycomb_single_patterns_decompose(rows in 1usize..5, cols in 1usize..5) {
        let g = build_honeycomb(rows, cols, &uniform()).unwrap();
        let p = single_qubit_pattern(&g).unwrap();
        prop_assert!(validate_pattern(&g, &p).is_valid());
        prop_assert!(2 * p.driven.len() >= g.num_qubits());
        prop_assert_eq!(&p, &single_qubit_pattern(&g).unwrap());
        check_decomposition(&g, &p);
    }

    #[test]
    fn honeycomb_two_qubit_patterns_decompose(rows in 1usize..5, cols in 1usize..5, pick in any::<prop::sample::Index>()) {
        let g = build_honeycomb(rows, cols, &uniform()).unwrap();
        let e = g.edges()[pick.index(g.edges().len())];
        let p = two_qubit_pattern(&g, (e.a, e.b)).unwrap();
        prop_assert!(validate_pattern(&g, &p).is_valid(), "{}", validate_pattern(&g, &p).summary());
        prop_assert_eq!(p.gate_pairs[0], (e.a, e.b));
        prop_assert_eq!(&p, &two_qubit_pattern(&g, (e.a, e.b)).unwrap());
        check_decomposition(&g, &p);
    }

    #[test]
    fn square_and_chain_patterns_decompose(rows in 2usize..6, cols in 2usize..6, pick in any::<prop::sample::Index>()) {
        let s = build_square(rows, cols, &uniform()).unwrap();
        let p = single_qubit_pattern(&s).unwrap();
        prop_assert!(validate_pattern(&s, &p).is_valid());
        check_decomposition(&s, &p);
        let e = s.edges()[pick.index(s.edges().len())];
        let p = two_qubit_pattern(&s, (e.a, e.b)).unwrap();
        prop_assert!(validate_pattern(&s, &p).is_valid(), "{}", validate_pattern(&s, &p).summary());
        check_decomposition(&s, &p);

        let c = build_chain(rows + cols, &uniform()).unwrap();
        let p = single_qubit_pattern(&c).unwrap();
        prop_assert!(validate_pattern(&c, &p).is_valid());
        check_decomposition(&c, &p);
        let e = c.edges()[pick.index(c.edges().len())];
        let p = two_qubit_pattern(&c, (e.a, e.b)).unwrap();
        prop_assert!(validate_pattern(&c, &p).is_valid());
        check_decomposition(&c, &p);
    }
}
