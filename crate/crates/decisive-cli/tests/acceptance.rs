//! Acceptance suite: one test per shipped guarantee, each printing a
//! PASS line with its runtime (run with `--nocapture` to see them) and
//! asserting its time budget.
//!
//! Run with: cargo test -p decisive-cli --test acceptance -- --nocapture

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use decisive::analysis::{decide_qualitative, replay_with_delays, simulate, Verdict};
use decisive::finite::{rational_to_f64, FiniteSts, StateDist};
use decisive::formula::{
    eliminate_quantifiers, equivalent, evaluate, parse_formula, OpenInterval,
};
use decisive::rat;
use decisive::shs::{cycle_reset_witness, delay_set, parse_model, HybridSystem, State};
use decisive::testutil::{
    decide_by_lattice, random_chain, random_formula, random_subset, random_valuation, rng,
    ruin_probability, FormulaGenConfig,
};
use decisive::Rational;

fn model_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
}

fn load(name: &str) -> HybridSystem {
    parse_model(&std::fs::read_to_string(model_path(name)).unwrap()).unwrap()
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_decisive")
}

fn finish(name: &str, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    println!("{name}: PASS ({:.2}s)", elapsed.as_secs_f64());
    assert!(
        elapsed <= budget,
        "{name} exceeded its {budget:?} budget: {elapsed:?}"
    );
}

/// Delay sets of the two-cycle system at the documented state are exact:
/// the first branch contributes [0, 0.8) and the union is [0, 1.8) ∖ {0.8}.
#[test]
fn criterion_01_delay_set_values() {
    let t0 = Instant::now();
    let h = load("cycle2.shs");
    let s = State::new(h.location_index("l0").unwrap(), vec![rat(0, 1), rat(1, 5)]);
    let (union, per_edge) = delay_set(&h, &s).unwrap();
    let e0 = h.edge_index("e0").unwrap();
    let cells_e0 = &per_edge.iter().find(|(ei, _)| *ei == e0).unwrap().1;
    assert_eq!(cells_e0.points, vec![rat(0, 1)]);
    assert_eq!(
        cells_e0.intervals,
        vec![OpenInterval {
            lo: Some(rat(0, 1)),
            hi: Some(rat(4, 5))
        }]
    );
    assert_eq!(union.points, vec![rat(0, 1)]);
    assert_eq!(
        union.intervals,
        vec![
            OpenInterval {
                lo: Some(rat(0, 1)),
                hi: Some(rat(4, 5))
            },
            OpenInterval {
                lo: Some(rat(4, 5)),
                hi: Some(rat(9, 5))
            },
        ]
    );
    finish("criterion 01 (delay sets)", t0, Duration::from_secs(1));
}

/// Forced-delay replay reproduces the documented mixed-transition sequence
/// exactly in rational arithmetic.
#[test]
fn criterion_02_trace_replay() {
    let t0 = Instant::now();
    let h = load("cycle2.shs");
    let start = State::new(h.location_index("l0").unwrap(), vec![rat(0, 1), rat(0, 1)]);
    let delays = [rat(2, 5), rat(3, 5), rat(1, 5), rat(3, 2)];
    let states = replay_with_delays(&h, &start, &delays).unwrap();
    let expect: [(&str, Rational, Rational); 5] = [
        ("l0", rat(0, 1), rat(0, 1)),
        ("l1", rat(2, 5), rat(2, 5)),
        ("l2", rat(1, 1), rat(0, 1)),
        ("l0", rat(0, 1), rat(1, 5)),
        ("l3", rat(3, 2), rat(17, 10)),
    ];
    for (s, (loc, x, y)) in states.iter().zip(&expect) {
        assert_eq!(h.locations[s.location].name, *loc);
        assert_eq!(s.valuation, vec![x.clone(), y.clone()]);
    }
    finish("criterion 02 (trace replay)", t0, Duration::from_secs(1));
}

/// The tool refuses qualitative verdicts for the non-cycle-reset two-cycle
/// system: exit code 3, witness printed, no verdict claimed.
#[test]
fn criterion_03_cycle_reset_refusal() {
    let t0 = Instant::now();
    let out = Command::new(bin())
        .args([
            "check",
            model_path("cycle2.shs").to_str().unwrap(),
            "--target",
            "hit_l2",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("witness cycle"));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(!stdout.contains("almost-sure") && !stdout.contains("verdict: zero"));
    finish("criterion 03 (refusal)", t0, Duration::from_secs(1));
}

/// Refinement of the drifting counter peels one unit interval per pass:
/// capping at 10 iterations yields exit 4 and blocks semantically equal to
/// (-inf, 0), [0, 1), ..., [8, 9) on the counter location.
#[test]
fn criterion_04_divergent_refinement() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("abs.json");
    let out = Command::new(bin())
        .args([
            "abstract",
            model_path("drift.shs").to_str().unwrap(),
            "--target",
            "goal",
            "--max-iter",
            "10",
            "--json",
            json.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let blocks = doc["abstraction_export"]["blocks"].as_array().unwrap();
    let vars = vec!["x".to_string()];
    let l0_blocks: Vec<decisive::formula::Formula> = blocks
        .iter()
        .filter(|b| b["location"] == "l0")
        .map(|b| parse_formula(b["formula"].as_str().unwrap(), &vars).unwrap())
        .collect();
    let mut expected = vec![parse_formula("x < 0", &vars).unwrap()];
    for i in 0..9 {
        expected.push(parse_formula(&format!("x >= {i} & x < {}", i + 1), &vars).unwrap());
    }
    for want in &expected {
        assert!(
            l0_blocks.iter().any(|b| equivalent(b, want).unwrap()),
            "no recorded block is semantically equal to {want}"
        );
    }
    assert!(!doc["abstraction_export"]["trace"].as_array().unwrap().is_empty());
    finish("criterion 04 (divergence)", t0, Duration::from_secs(10));
}

/// Decisiveness criterion checker: over 1000 random 8-state chains with
/// random A and B, whenever the hypotheses hold the exact decisiveness
/// check passes for every state.
#[test]
fn criterion_05_criterion_suite() {
    let t0 = Instant::now();
    let mut r = rng(501);
    let mut applicable = 0usize;
    for i in 0..1000 {
        let chain = random_chain(&mut r, 8);
        let a = if i % 10 == 0 {
            (0..8).collect::<Vec<_>>()
        } else {
            random_subset(&mut r, 8, 0.4)
        };
        let b = random_subset(&mut r, 8, 0.3);
        let report = decisive::finite::check_criterion(&chain, &a, &b).unwrap();
        if report.applicable {
            applicable += 1;
            assert_eq!(
                report.decisive_verified,
                Some(true),
                "decisiveness check failed on chain {i}: A = {a:?}, B = {b:?}\n{}",
                chain
            );
        }
    }
    assert!(applicable >= 100, "only {applicable} applicable samples");
    finish(
        "criterion 05 (decisiveness criterion suite)",
        t0,
        Duration::from_secs(30),
    );
}

/// Bounded-below-visits checker: whenever every state of A reaches B with
/// positive probability, the probability of forever avoiding B while
/// visiting A infinitely often is exactly zero.
#[test]
fn criterion_06_bounded_visits_suite() {
    let t0 = Instant::now();
    let mut r = rng(601);
    let mut hypothesis_held = 0usize;
    for i in 0..1000 {
        let chain = random_chain(&mut r, 8);
        let a = random_subset(&mut r, 8, 0.4);
        let b = random_subset(&mut r, 8, 0.3);
        let report = decisive::finite::check_lemma6(&chain, &a, &b).unwrap();
        if report.hypothesis_holds {
            hypothesis_held += 1;
            assert!(
                report.prob_max() == rat(0, 1),
                "non-zero probability on chain {i}: A = {a:?}, B = {b:?}"
            );
        }
    }
    assert!(hypothesis_held >= 100, "only {hypothesis_held} held");
    finish(
        "criterion 06 (bounded-visits suite)",
        t0,
        Duration::from_secs(30),
    );
}

/// Approximation scheme: on 1000 random 8-state chains the certified
/// interval converges at width 1e-4, brackets the exact probability, and
/// p_yes + p_no reaches 1 − ε.
#[test]
fn criterion_07_scheme_bracketing() {
    let t0 = Instant::now();
    let mut r = rng(701);
    let eps = rat(1, 10_000);
    for i in 0..1000 {
        let chain = random_chain(&mut r, 8);
        let b = random_subset(&mut r, 8, 0.3);
        let mu = StateDist::uniform(8);
        let iv = chain.approx_reach(&mu, &b, &eps, 1_000_000).unwrap();
        assert!(iv.converged, "no convergence on chain {i}");
        assert!(iv.width() <= eps, "width too large on chain {i}");
        let exact: Rational = chain
            .reach_prob_exact(&b)
            .unwrap()
            .iter()
            .map(|p| p * rat(1, 8))
            .sum();
        assert!(
            iv.contains(&exact),
            "interval [{}, {}] misses exact {} on chain {i}",
            iv.lo,
            iv.hi,
            exact
        );
        // Termination condition p_yes(n) + p_no(n) ≥ 1 − ε, re-derived
        // through the independent one-shot computation for moderate step
        // counts (for the rare very slow chains the interval identity
        // lo + (1 − hi) = p_yes + p_no already witnesses it).
        if iv.steps_used <= 4096 {
            let (py, pn) = chain.p_yes_no(&mu, &b, iv.steps_used).unwrap();
            assert!(py + pn >= rat(1, 1) - &eps);
        } else {
            assert!(&iv.lo + (rat(1, 1) - &iv.hi) >= rat(1, 1) - &eps);
        }
    }
    finish(
        "criterion 07 (scheme bracketing)",
        t0,
        Duration::from_secs(60),
    );
}

/// Gambler's ruin: the exact solver matches the closed form exactly and
/// value iteration to 1e-9; the walk modeled as a hybrid system fails
/// cycle-reset; reflecting truncations show the non-decisiveness signature
/// (p_no stays 0 while p_yes plateaus below 1).
#[test]
fn criterion_08_gamblers_ruin() {
    let t0 = Instant::now();
    let p_up = rat(7, 10);
    let n = 20usize;

    // Absorbing truncation: closed form, exact solver, value iteration.
    let chain = ruin_chain(n, &p_up, true);
    let exact = chain.reach_prob_exact(&[0]).unwrap();
    let closed = ruin_probability(&p_up, n, 1);
    assert_eq!(exact[1], closed, "exact solver vs closed form");
    let vi = chain.value_iteration(&[0], 1e-13, 1_000_000);
    assert!(
        (vi[1] - rational_to_f64(&closed)).abs() < 1e-9,
        "value iteration off: {} vs {}",
        vi[1],
        rational_to_f64(&closed)
    );

    // As a hybrid system the walk is not cycle-reset.
    let h = load("walk.shs");
    assert!(cycle_reset_witness(&h).is_some());

    // Reflecting truncations: avoid-set empty so p_no is identically zero,
    // and p_yes plateaus near the infinite-walk value 3/7, far below 1.
    for trunc in [20usize, 40, 80] {
        let chain = ruin_chain(trunc, &p_up, false);
        assert!(chain.avoid_set(&[0]).is_empty());
        let mu = StateDist::dirac(trunc + 1, 1);
        let iv = chain.approx_reach(&mu, &[0], &rat(1, 10_000), 200).unwrap();
        assert!(!iv.converged, "truncation {trunc} should not converge");
        let (py, pn) = chain.p_yes_no(&mu, &[0], 200).unwrap();
        assert_eq!(pn, rat(0, 1), "p_no must stay zero");
        let py_f = rational_to_f64(&py);
        assert!(py_f < 0.5, "p_yes {py_f} does not plateau below 1");
        assert!((py_f - 3.0 / 7.0).abs() < 0.05, "p_yes {py_f} far from 3/7");
    }
    finish("criterion 08 (gambler's ruin)", t0, Duration::from_secs(10));
}

/// Qualitative end-to-end: the strong-reset variant hits its target almost
/// surely, and simulation with 10^4 runs at horizon 10^3 confirms ≥ 99.9%.
#[test]
fn criterion_09_qualitative_end_to_end() {
    let t0 = Instant::now();
    let h = load("cycle2_strong.shs");
    let target = h.targets["hit_l2"].clone();
    let report = decide_qualitative(&h, &target, 50).unwrap();
    assert_eq!(report.verdict, Verdict::AlmostSure);
    let sim = simulate(&h, &target, 1000, 10_000, 20_260_809).unwrap();
    let freq = sim.hits as f64 / sim.samples as f64;
    assert!(freq >= 0.999, "hit frequency {freq} below 99.9%");
    finish(
        "criterion 09 (qualitative end-to-end)",
        t0,
        Duration::from_secs(60),
    );
}

/// Quantitative end-to-end: the coin-flip system gets a certified interval
/// of width ≤ 1e-3 containing 1/2, overlapping the 10^5-sample Wilson
/// interval.
#[test]
fn criterion_10_quantitative_end_to_end() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("approx.json");
    let out = Command::new(bin())
        .args([
            "approx",
            model_path("half.shs").to_str().unwrap(),
            "--target",
            "half",
            "--eps",
            "0.001",
            "--json",
            json.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let lo = doc["interval"]["lo"].as_f64().unwrap();
    let hi = doc["interval"]["hi"].as_f64().unwrap();
    assert!(hi - lo <= 1e-3 + 1e-12, "width {}", hi - lo);
    assert!(lo <= 0.5 && 0.5 <= hi, "[{lo}, {hi}] misses 1/2");

    let h = load("half.shs");
    let sim = simulate(&h, &h.targets["half"].clone(), 10, 100_000, 31).unwrap();
    assert!(
        sim.wilson_lo <= hi && lo <= sim.wilson_hi,
        "certified [{lo}, {hi}] vs Wilson [{}, {}]",
        sim.wilson_lo,
        sim.wilson_hi
    );
    finish(
        "criterion 10 (quantitative end-to-end)",
        t0,
        Duration::from_secs(60),
    );
}

/// Differential test: quantifier elimination agrees with the
/// threshold-lattice brute-force oracle on 1000 random formulas at 1000
/// random rational points each — zero disagreements.
#[test]
fn criterion_11_qe_differential() {
    let t0 = Instant::now();
    let cfg = FormulaGenConfig::default();
    let mut r = rng(1101);
    let mut disagreements = 0usize;
    for _ in 0..1000 {
        let f = random_formula(&mut r, &cfg);
        let free: Vec<String> = f.free_vars().into_iter().collect();
        let qf = eliminate_quantifiers(&f).unwrap();
        for _ in 0..1000 {
            let val = random_valuation(&mut r, &free);
            let via_qe = evaluate(&qf, &val).unwrap();
            let via_oracle = decide_by_lattice(&f, &val);
            if via_qe != via_oracle {
                disagreements += 1;
                eprintln!("disagreement on {f} at {val:?}");
            }
        }
    }
    assert_eq!(disagreements, 0);
    finish(
        "criterion 11 (QE differential)",
        t0,
        Duration::from_secs(120),
    );
}

/// Gambler's-ruin kernel on 0..=n: state 0 absorbing; state n absorbing
/// when `absorb_top`, otherwise reflecting (the up-step stays in place).
fn ruin_chain(n: usize, p_up: &Rational, absorb_top: bool) -> FiniteSts {
    let m = n + 1;
    let mut kernel = vec![vec![rat(0, 1); m]; m];
    kernel[0][0] = rat(1, 1);
    for k in 1..n {
        kernel[k][k + 1] = p_up.clone();
        kernel[k][k - 1] = rat(1, 1) - p_up;
    }
    if absorb_top {
        kernel[n][n] = rat(1, 1);
    } else {
        kernel[n][n] = p_up.clone();
        kernel[n][n - 1] = rat(1, 1) - p_up;
    }
    FiniteSts::new(kernel, None).unwrap()
}
