//! Refinement behavior on the bundled systems: the drifting counter refines
//! forever (peeling unit intervals), the strong-reset variant of the
//! two-cycle system stabilizes.

mod common;
use common::load;
use decisive::abstraction::{
    build_abstraction, check_partition_invariants, initial_partition, to_finite_sts,
    AbstractionError, Refiner,
};
use decisive::formula::{equivalent, parse_formula, Formula};

#[test]
fn drift_refinement_peels_unit_intervals() {
    let h = load("drift.shs");
    let target = h.targets["goal"].clone();
    let err = build_abstraction(&h, &target, 10).unwrap_err();
    let (partition, trace) = match err {
        AbstractionError::CapExceeded {
            partition, trace, ..
        } => (partition, trace),
        other => panic!("expected CapExceeded, got {other}"),
    };
    assert_eq!(trace.len(), 10);
    // One split per pass once the peeling starts.
    assert_eq!(partition.blocks.len(), 12);
    check_partition_invariants(&h, &partition).unwrap();

    // The counter location is cut into (−∞,0), [0,1), ..., [8,9), [9,∞).
    let l0 = h.location_index("l0").unwrap();
    let vars: Vec<String> = vec!["x".into()];
    let mut expected: Vec<Formula> = vec![parse_formula("x < 0", &vars).unwrap()];
    for i in 0..9 {
        expected.push(parse_formula(&format!("x >= {i} & x < {}", i + 1), &vars).unwrap());
    }
    expected.push(parse_formula("x >= 9", &vars).unwrap());

    let blocks: Vec<&decisive::abstraction::Block> = partition.blocks_of(l0).collect();
    assert_eq!(blocks.len(), expected.len());
    for want in &expected {
        let found = blocks
            .iter()
            .any(|b| equivalent(&b.formula, want).unwrap());
        assert!(found, "no block semantically equal to {want}");
    }

    // The goal location stays a single block.
    let l1 = h.location_index("l1").unwrap();
    assert_eq!(partition.blocks_of(l1).count(), 1);
}

#[test]
fn strong_two_cycle_abstraction_stabilizes() {
    let h = load("cycle2_strong.shs");
    let target = h.targets["hit_l2"].clone();
    let a = build_abstraction(&h, &target, 50).unwrap();
    assert!(a.iterations < 50);
    assert!(!a.blocks.is_empty());

    // Regression values for this fixture: refinement stabilizes quickly and
    // every block still reaches the target block set in the qualitative
    // graph.
    let sts = to_finite_sts(&a).unwrap();
    let avoid = sts.avoid_set(&a.target_blocks);
    assert!(
        avoid.is_empty(),
        "some abstract block cannot reach the target: {avoid:?}"
    );
    assert_eq!(a.initial_support.len(), 1);

    // Partition invariants hold at the fixpoint.
    let p = {
        // Rebuild the partition view from the abstraction blocks.
        let mut part = initial_partition(&h, &target).unwrap();
        let mut refiner = Refiner::new(&h);
        while refiner.refine_once(&mut part).unwrap() {}
        part
    };
    check_partition_invariants(&h, &p).unwrap();
}

#[test]
fn verdicts_invariant_under_positive_reweighting() {
    use decisive::Rational;
    // Re-weighting the abstract chain with arbitrary positive weights never
    // changes qualitative answers: they only depend on the support.
    let h = load("cycle2_strong.shs");
    let target = h.targets["hit_l2"].clone();
    let a = build_abstraction(&h, &target, 50).unwrap();
    let base = to_finite_sts(&a).unwrap();
    let mut rng = decisive::testutil::rng(99);
    for _ in 0..5 {
        let n = base.n_states();
        let mut kernel = vec![vec![Rational::from_integer(0.into()); n]; n];
        for i in 0..n {
            let succ: Vec<usize> = (0..n)
                .filter(|&j| num_traits::Signed::is_positive(&base.kernel()[i][j]))
                .collect();
            let mut weights: Vec<i64> = succ
                .iter()
                .map(|_| rand::Rng::gen_range(&mut rng, 1..9i64))
                .collect();
            let total: i64 = weights.iter().sum();
            for (k, &j) in succ.iter().enumerate() {
                kernel[i][j] = decisive::rat(weights[k], total);
            }
            weights.clear();
        }
        let reweighted = decisive::finite::FiniteSts::new(kernel, None).unwrap();
        assert_eq!(
            reweighted.avoid_set(&a.target_blocks),
            base.avoid_set(&a.target_blocks)
        );
        for (i, b) in [(0usize, a.target_blocks.clone())] {
            let _ = (i, b);
        }
        // Backward reachability (positive-probability verdicts) coincides.
        let w1 = base.backward_reach(&a.target_blocks);
        let w2 = reweighted.backward_reach(&a.target_blocks);
        assert_eq!(w1, w2);
    }
}
