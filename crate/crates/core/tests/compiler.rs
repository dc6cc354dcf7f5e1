mod common;

use std::collections::BTreeSet;

use common::{honeycomb_fragment, rng};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use zzarray_core::compiler::*;
use zzarray_core::hamiltonian::ArrayParameters;
use zzarray_core::lattice::*;
use zzarray_core::robust::{optimize_avg, OptimizationConfig, UncertaintySpec};

fn shift_circuit(a: usize, b: usize) -> Circuit {
    Circuit::parse(&format!("CNOT {a} {b}\nH {a}\nT {b}\n")).unwrap()
}

fn block_of(step: &Step, q: usize) -> Option<&Block> {
    step.blocks.iter().find(|bl| bl.contains(q))
}

#[test]
fn fragment_circuit_shifts_the_blocks() {
    let (g, a, b) = honeycomb_fragment();
    let circuit = shift_circuit(a, b);
    let schedule = compile(&circuit, &g).unwrap();
    assert_eq!(schedule.step_count(), 3);

    let s0 = &schedule.steps[0];
    assert_eq!(s0.pattern.gate_pairs[0], (a, b));
    let pair_block = block_of(s0, a).unwrap();
    assert_eq!(pair_block.center(), [a, b]);
    assert_eq!(pair_block.num_qubits(), 6);

    for (step, driven, idle) in [(&schedule.steps[1], a, b), (&schedule.steps[2], b, a)] {
        assert!(step.pattern.is_driven(driven) && !step.pattern.is_driven(idle));
        let bl = block_of(step, driven).unwrap();
        assert_eq!(bl.center(), [driven]);
        assert_eq!(bl.num_qubits(), 4);
        assert!(bl.boundary().contains(&idle));
    }

    let report = verify_schedule(&schedule, &circuit, &g);
    assert!(report.is_valid(), "{:?}", report.issues);
    assert_eq!((report.step_count, report.circuit_depth), (3, 2));
    assert_eq!(report.overhead, 1.5);
    let placed: Vec<usize> = schedule.steps.iter().flat_map(|s| s.gates.iter().map(|g| g.0)).collect();
    assert_eq!(placed, [0, 1, 2]);
}

#[test]
fn empty_circuit_gives_empty_schedule() {
    let (g, _, _) = honeycomb_fragment();
    let schedule = compile(&Circuit::default(), &g).unwrap();
    assert_eq!(schedule.step_count(), 0);
    let report = verify_schedule(&schedule, &Circuit::default(), &g);
    assert!(report.is_valid());
    assert_eq!(report.overhead, 1.0);
    let u = simulate_schedule(&schedule, &g, &PulseLibrary::new(), &ArrayParameters::nominal(&g)).unwrap().to_dense();
    assert_eq!(u.max_abs_diff(&zzarray_core::linalg::DenseMatrix::identity(1 << g.num_qubits())), 0.0);
}

#[test]
fn dropped_gate_is_reported() {
    let (g, a, b) = honeycomb_fragment();
    let circuit = shift_circuit(a, b);
    let mut schedule = compile(&circuit, &g).unwrap();
    schedule.steps.pop();
    let report = verify_schedule(&schedule, &circuit, &g);
    assert!(report.issues.contains(&ScheduleIssue::MissingGate(2)));
    assert!(!report.is_valid());
}

#[test]
fn full_sublattice_runs_in_one_step() {
    let g = build_honeycomb(3, 3, &CouplingAssignment::Uniform(1.0)).unwrap();
    let p = single_qubit_pattern(&g).unwrap();
    let text: String = p.driven.iter().enumerate().map(|(i, q)| format!("{} {q}\n", ["H", "T", "X"][i % 3])).collect();
    let c = Circuit::parse(&text).unwrap();
    let s = compile(&c, &g).unwrap();
    assert_eq!(s.step_count(), 1);
    assert!(verify_schedule(&s, &c, &g).is_valid());
}

#[test]
fn non_edge_cnot_is_rejected() {
    let (g, a, _) = honeycomb_fragment();
    let far = (0..g.num_qubits()).find(|&q| q != a && g.edge_index(a, q).is_none()).unwrap();
    let c = Circuit::parse(&format!("CNOT {a} {far}")).unwrap();
    assert!(compile(&c, &g).is_err());
}

fn random_dense_circuit(graph: &QubitGraph, seed: u64) -> Circuit {
    let mut r = rng(seed);
    let n = graph.num_qubits();
    let mut text = String::new();
    for _ in 0..3 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        for q in order {
            let gate = ["H", "T", "X", "I"][r.gen_range(0..4)];
            text.push_str(&format!("{gate} {q}\n"));
        }
    }
    Circuit::parse(&text).unwrap()
}

#[test]
fn dense_single_qubit_overhead_audit() {
    let j = CouplingAssignment::Uniform(1.0);
    let patches = [build_honeycomb(4, 4, &j).unwrap(), build_square(4, 4, &j).unwrap()];
    for g in &patches {
        let mut worst = 0.0f64;
        for seed in 0..50 {
            let c = random_dense_circuit(g, seed);
            let s = compile(&c, g).unwrap();
            let report = verify_schedule(&s, &c, g);
            assert!(report.is_valid(), "{:?}", report.issues);
            worst = worst.max(report.overhead);
        }
        assert!(worst <= 2.0, "observed overhead {worst}");
    }
}

/// Every adjacent driven pair is a declared gate pair.
fn check_no_stray_pairs(schedule: &Schedule, graph: &QubitGraph) -> Result<(), TestCaseError> {
    for step in &schedule.steps {
        let pairs: BTreeSet<(usize, usize)> =
            step.pattern.gate_pairs.iter().map(|&(x, y)| (x.min(y), x.max(y))).collect();
        for e in graph.edges() {
            if step.pattern.is_driven(e.a) && step.pattern.is_driven(e.b) {
                prop_assert!(pairs.contains(&(e.a.min(e.b), e.a.max(e.b))));
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_circuits_compile_deterministically(seed in any::<u64>(), len in 1usize..25) {
        let g = build_honeycomb(2, 3, &CouplingAssignment::Uniform(1.0)).unwrap();
        let mut r = rng(seed);
        let mut text = String::new();
        for _ in 0..len {
            if r.gen_bool(0.3) {
                let e = g.edges()[r.gen_range(0..g.edges().len())];
                let (x, y) = if r.gen_bool(0.5) { (e.a, e.b) } else { (e.b, e.a) };
                text.push_str(&format!("CNOT {x} {y}\n"));
            } else {
                text.push_str(&format!("{} {}\n", ["H", "T", "X"][r.gen_range(0..3)], r.gen_range(0..g.num_qubits())));
            }
        }
        let c = Circuit::parse(&text).unwrap();
        let s = compile(&c, &g).unwrap();
        prop_assert_eq!(&s, &compile(&c, &g).unwrap());
        let report = verify_schedule(&s, &c, &g);
        prop_assert!(report.is_valid(), "{:?}", report.issues);
        check_no_stray_pairs(&s, &g)?;
    }
}

#[test]
fn identity_schedule_is_identity_up_to_phase() {
    let g = build_chain(5, &CouplingAssignment::Uniform(1.0)).unwrap();
    let c = Circuit::parse("I 1\nI 2\nI 3\n").unwrap();
    let schedule = compile(&c, &g).unwrap();
    let config = OptimizationConfig {
        num_bins: 30,
        initial_amplitude: 1.0,
        max_evaluations: 600,
        num_restarts: 3,
        target_infidelity: Some(1e-10),
        ..OptimizationConfig::default()
    };
    let mut library = PulseLibrary::new();
    let mut worst_pulse = 1.0f64;
    for (target, block) in library_requirements(&schedule) {
        assert_eq!(target.name(), "I");
        let r = optimize_avg(&block, &target, &UncertaintySpec::none(), &config).unwrap();
        worst_pulse = worst_pulse.min(r.worst_case);
        library.insert(&target, BlockShape::of(&block), r.controls).unwrap();
    }
    assert!(1.0 - worst_pulse <= 1e-8, "pulse infidelity {}", 1.0 - worst_pulse);
    let u = simulate_schedule(&schedule, &g, &library, &ArrayParameters::nominal(&g)).unwrap().to_dense();
    let identity = ideal_circuit_unitary(&c, g.num_qubits()).unwrap();
    let f = process_fidelity(&u, &identity).unwrap();
    assert!(1.0 - f <= 1e-6, "process infidelity {}", 1.0 - f);
    let blocks: usize = schedule.steps.iter().map(|s| s.blocks.len()).sum();
    assert!(1.0 - f <= 10.0 * blocks as f64 * (1.0 - worst_pulse).max(1e-15) + 1e-12);
}
