//! Differential validation of quantifier elimination against the
//! threshold-lattice brute-force oracle, plus structural QE properties.

use std::collections::BTreeMap;

use decisive::formula::{
    decompose_1d, eliminate_quantifiers, evaluate, interior_nonempty_formula, parse_formula,
    Formula,
};
use decisive::testutil::{
    decide_by_lattice, random_formula, random_valuation, rng, FormulaGenConfig,
};
use decisive::Rational;

/// QE output must agree with the independent oracle on random formulas at
/// random rational points. A smaller instance of the acceptance-suite run,
/// kept here so the library crate checks itself.
#[test]
fn qe_agrees_with_lattice_oracle() {
    let cfg = FormulaGenConfig::default();
    let mut r = rng(0xDEC1517E);
    let mut checked = 0usize;
    for _ in 0..150 {
        let f = random_formula(&mut r, &cfg);
        let free: Vec<String> = f.free_vars().into_iter().collect();
        let qf = eliminate_quantifiers(&f).expect("QE total on the fragment");
        assert!(qf.is_quantifier_free());
        for _ in 0..40 {
            let val = random_valuation(&mut r, &free);
            let via_qe = evaluate(&qf, &val).unwrap();
            let via_oracle = decide_by_lattice(&f, &val);
            assert_eq!(
                via_qe, via_oracle,
                "disagreement on {f} at {val:?} (QE said {via_qe})"
            );
            checked += 1;
        }
    }
    assert!(checked >= 6000);
}

/// QE is a fixed point on its own output.
#[test]
fn qe_idempotent_on_random_formulas() {
    let cfg = FormulaGenConfig::default();
    let mut r = rng(0x1DEA);
    for _ in 0..200 {
        let f = random_formula(&mut r, &cfg);
        let once = eliminate_quantifiers(&f).unwrap();
        let twice = eliminate_quantifiers(&once).unwrap();
        assert_eq!(once, twice, "not idempotent on {f}");
    }
}

/// decompose_1d(f) and decompose_1d(¬f) partition the line exactly.
#[test]
fn decomposition_partitions_the_line() {
    let cfg = FormulaGenConfig {
        free_vars: vec!["t".into()],
        max_quantifiers: 2,
        max_depth: 3,
    };
    let mut r = rng(0xCE11);
    for _ in 0..150 {
        let f = random_formula(&mut r, &cfg);
        if f.free_vars().is_empty() {
            continue;
        }
        let pos = decompose_1d(&f, "t").unwrap();
        let neg = decompose_1d(&Formula::not(f.clone()), "t").unwrap();
        // Union is ℝ: check on all boundary points and interval samples.
        let mut samples: Vec<Rational> = Vec::new();
        for d in [&pos, &neg] {
            samples.extend(d.points.iter().cloned());
            for iv in &d.intervals {
                samples.push(iv.sample());
                if let Some(a) = &iv.lo {
                    samples.push(a.clone());
                }
                if let Some(b) = &iv.hi {
                    samples.push(b.clone());
                }
            }
        }
        samples.push(decisive::rat(0, 1));
        samples.sort();
        samples.dedup();
        // Also midpoints between consecutive samples and outer points.
        let mut probes = samples.clone();
        for w in samples.windows(2) {
            probes.push((&w[0] + &w[1]) / decisive::rat(2, 1));
        }
        if let (Some(first), Some(last)) = (samples.first(), samples.last()) {
            probes.push(first - decisive::rat(1, 1));
            probes.push(last + decisive::rat(1, 1));
        }
        for q in probes {
            let in_pos = pos.contains(&q);
            let in_neg = neg.contains(&q);
            assert!(
                in_pos ^ in_neg,
                "point {q} (formula {f}) in pos: {in_pos}, in neg: {in_neg}"
            );
        }
    }
}

/// For single-variable sections, non-empty interior agrees with the cell
/// decomposition having at least one open interval.
#[test]
fn interior_agrees_with_decomposition() {
    let cfg = FormulaGenConfig {
        free_vars: vec!["t".into()],
        max_quantifiers: 1,
        max_depth: 2,
    };
    let mut r = rng(0x17E2107);
    for _ in 0..120 {
        let f = random_formula(&mut r, &cfg);
        if !f.free_vars().contains("t") {
            continue;
        }
        let d = decompose_1d(&f, "t").unwrap();
        let g = interior_nonempty_formula(&f, &["t".to_string()]).unwrap();
        let expected = !d.intervals.is_empty();
        match g {
            Formula::True => assert!(expected, "interior said yes, cells say no: {f}"),
            Formula::False => assert!(!expected, "interior said no, cells say yes: {f}"),
            other => panic!("interior over a closed section must be constant, got {other}"),
        }
    }
}

/// Round trip: printing a normalized formula and re-parsing it gives the
/// same tree.
#[test]
fn display_parse_round_trip_on_random_formulas() {
    let cfg = FormulaGenConfig::default();
    let mut r = rng(0x0DD);
    for _ in 0..300 {
        let f = random_formula(&mut r, &cfg).normalized();
        let printed = format!("{f}");
        let declared: Vec<String> = f.free_vars().into_iter().collect();
        let reparsed = parse_formula(&printed, &declared)
            .unwrap_or_else(|e| panic!("reparse of '{printed}' failed: {e}"))
            .normalized();
        assert_eq!(f, reparsed, "printed form: {printed}");
    }
}

/// The worked end-to-end example: substitution composed with QE behaves like
/// the delay-set computation it backs.
#[test]
fn quantified_substitution_pipeline() {
    let vars: Vec<String> = vec!["x".into(), "y".into()];
    // Invariant y < 1 composed with the flow y ↦ y + τ, then asking for a
    // feasible delay window.
    let inv = parse_formula("y < 1", &vars).unwrap();
    let mut flow = BTreeMap::new();
    flow.insert(
        "y".to_string(),
        decisive::formula::Term::var("y").add(&decisive::formula::Term::var("tau")),
    );
    let shifted = inv.substitute(&flow);
    assert_eq!(format!("{}", shifted.normalized()), "tau + y < 1");
    let feasible = Formula::exists(
        "tau",
        Formula::and(vec![
            parse_formula("tau >= 0", &["tau".to_string()]).unwrap(),
            shifted,
        ]),
    );
    let qf = eliminate_quantifiers(&feasible).unwrap();
    let expect = parse_formula("y < 1", &vars).unwrap().normalized();
    assert_eq!(qf, expect);
}
