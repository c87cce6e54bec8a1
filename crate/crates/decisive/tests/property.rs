//! Property tests over random structures.

use std::collections::BTreeMap;

use proptest::prelude::*;

use decisive::finite::{FiniteSts, StateDist};
use decisive::formula::{
    decompose_1d, eliminate_quantifiers, parse_formula, Formula, Rel, Term,
};
use decisive::{rat, Rational};

fn small_rational() -> impl Strategy<Value = Rational> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| rat(n, d))
}

fn term(vars: &'static [&'static str]) -> impl Strategy<Value = Term> {
    (
        proptest::collection::vec((0..vars.len(), small_rational()), 1..=2),
        small_rational(),
    )
        .prop_map(move |(coefs, konst)| {
            let mut t = Term::constant(konst);
            for (vi, c) in coefs {
                t = t.add(&Term::var(vars[vi]).scale(&c));
            }
            t
        })
}

fn rel() -> impl Strategy<Value = Rel> {
    prop_oneof![Just(Rel::Lt), Just(Rel::Le), Just(Rel::Eq)]
}

fn qf_formula(vars: &'static [&'static str]) -> impl Strategy<Value = Formula> {
    let atom = (term(vars), rel()).prop_map(|(t, r)| Formula::atom(t, r));
    atom.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 2..=3).prop_map(Formula::and),
            proptest::collection::vec(inner.clone(), 2..=3).prop_map(Formula::or),
            inner.prop_map(Formula::not),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Normalization is idempotent on arbitrary formulas.
    #[test]
    fn normalization_idempotent(f in qf_formula(&["x", "y"])) {
        let once = f.normalized();
        prop_assert_eq!(once.clone(), once.normalized());
    }

    /// QE is a fixed point on quantifier-free formulas.
    #[test]
    fn qe_fixed_point_on_qf(f in qf_formula(&["x", "y"])) {
        let once = eliminate_quantifiers(&f).unwrap();
        let twice = eliminate_quantifiers(&once).unwrap();
        prop_assert_eq!(once, twice);
    }

    /// Pretty-printed normalized formulas re-parse to the same tree.
    #[test]
    fn display_round_trip(f in qf_formula(&["x", "y"])) {
        let n = f.normalized();
        let printed = format!("{n}");
        let declared: Vec<String> = n.free_vars().into_iter().collect();
        let back = parse_formula(&printed, &declared).unwrap().normalized();
        prop_assert_eq!(n, back);
    }

    /// A set and its complement decompose the line into disjoint covering
    /// cells: checked at all cell boundary points and samples.
    #[test]
    fn decomposition_complementary(f in qf_formula(&["t"])) {
        let pos = decompose_1d(&f, "t").unwrap();
        let neg = decompose_1d(&Formula::not(f), "t").unwrap();
        let mut probes: Vec<Rational> = Vec::new();
        for d in [&pos, &neg] {
            probes.extend(d.points.iter().cloned());
            for iv in &d.intervals {
                probes.push(iv.sample());
            }
        }
        probes.push(rat(0, 1));
        for q in probes {
            prop_assert!(pos.contains(&q) ^ neg.contains(&q));
        }
    }

    /// Existential projection never shrinks truth: if f holds at (x, y),
    /// then ∃y f holds at x.
    #[test]
    fn projection_is_sound(f in qf_formula(&["x", "y"]), x in small_rational(), y in small_rational()) {
        let mut val = BTreeMap::new();
        val.insert("x".to_string(), x.clone());
        val.insert("y".to_string(), y);
        if f.eval(&val).unwrap_or(false) {
            let projected = eliminate_quantifiers(&Formula::exists("y", f)).unwrap();
            let mut xval = BTreeMap::new();
            xval.insert("x".to_string(), x);
            prop_assert!(projected.eval(&xval).unwrap());
        }
    }
}

fn stochastic_row(n: usize) -> impl Strategy<Value = Vec<Rational>> {
    proptest::collection::vec(0u32..=4, n).prop_map(move |ws| {
        let mut ws = ws;
        if ws.iter().all(|&w| w == 0) {
            ws[0] = 1;
        }
        let total: u32 = ws.iter().sum();
        ws.into_iter()
            .map(|w| rat(w as i64, total as i64))
            .collect()
    })
}

fn chain(n: usize) -> impl Strategy<Value = FiniteSts> {
    proptest::collection::vec(stochastic_row(n), n)
        .prop_map(|rows| FiniteSts::new(rows, None).unwrap())
}

fn subset(n: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(proptest::bool::ANY, n).prop_map(|bits| {
        bits.into_iter()
            .enumerate()
            .filter(|(_, b)| *b)
            .map(|(i, _)| i)
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Transform preserves the probability simplex exactly.
    #[test]
    fn transform_preserves_simplex(c in chain(5)) {
        use num_traits::One;
        let mut mu = StateDist::uniform(5);
        for _ in 0..4 {
            mu = c.transform(&mu).unwrap();
            let total: Rational = mu.0.iter().cloned().sum();
            prop_assert!(total.is_one());
        }
    }

    /// Avoid-set duality: B never meets its avoid-set, and the avoid-set is
    /// closed under positive-probability successors.
    #[test]
    fn avoid_set_duality(c in chain(5), b in subset(5)) {
        let btilde = c.avoid_set(&b);
        for s in &b {
            prop_assert!(!btilde.contains(s));
        }
        let succ = c.successors();
        for &s in &btilde {
            for &t in &succ[s] {
                prop_assert!(btilde.contains(&t));
            }
        }
    }

    /// Exact reachability is zero exactly on the avoid-set and one exactly
    /// outside the backward reach of the avoid-set.
    #[test]
    fn reach_prob_boundary_cases(c in chain(5), b in subset(5)) {
        use num_traits::{One, Zero};
        let p = c.reach_prob_exact(&b).unwrap();
        let btilde = c.avoid_set(&b);
        let back = c.backward_reach(&btilde);
        for s in 0..5 {
            prop_assert_eq!(p[s].is_zero(), btilde.contains(&s));
            prop_assert_eq!(p[s].is_one(), !back[s]);
        }
    }

    /// The bounded-step sequences are monotone, bracket the exact value,
    /// and the certified interval of the scheme contains it.
    #[test]
    fn scheme_monotone_and_bracketing(c in chain(5), b in subset(5)) {
        let mu = StateDist::uniform(5);
        let exact: Rational = c
            .reach_prob_exact(&b)
            .unwrap()
            .iter()
            .map(|p| p * rat(1, 5))
            .sum();
        let mut prev_yes = rat(-1, 1);
        let mut prev_no = rat(-1, 1);
        for n in 0..12 {
            let (py, pn) = c.p_yes_no(&mu, &b, n).unwrap();
            prop_assert!(py >= prev_yes);
            prop_assert!(pn >= prev_no);
            prop_assert!(py <= exact.clone());
            prop_assert!(exact.clone() <= rat(1, 1) - pn.clone());
            prev_yes = py;
            prev_no = pn;
        }
        let iv = c.approx_reach(&mu, &b, &rat(1, 1000), 1_000_000).unwrap();
        prop_assert!(iv.converged);
        prop_assert!(iv.contains(&exact));
    }
}
