//! End-to-end analysis of the bundled systems: exact trace replay,
//! qualitative verdicts, certified quantitative intervals, and agreement
//! between the symbolic and statistical routes.

mod common;
use common::load;

use decisive::analysis::{
    approx_quantitative, decide_qualitative, mixed_step, replay_with_delays, sample_run,
    simulate, AnalysisError, QuantConfig, StsView, Verdict,
};
use decisive::rat;
use decisive::shs::{Compiled, State};
use decisive::Rational;

fn r(n: i64, d: i64) -> Rational {
    rat(n, d)
}

#[test]
fn forced_delay_replay_is_exact() {
    let h = load("cycle2.shs");
    let start = State::new(h.location_index("l0").unwrap(), vec![r(0, 1), r(0, 1)]);
    let delays = [r(2, 5), r(3, 5), r(1, 5), r(3, 2)];
    let states = replay_with_delays(&h, &start, &delays).unwrap();
    let expect = [
        ("l0", r(0, 1), r(0, 1)),
        ("l1", r(2, 5), r(2, 5)),
        ("l2", r(1, 1), r(0, 1)),
        ("l0", r(0, 1), r(1, 5)),
        ("l3", r(3, 2), r(17, 10)),
    ];
    assert_eq!(states.len(), expect.len());
    for (s, (loc, x, y)) in states.iter().zip(&expect) {
        assert_eq!(h.locations[s.location].name, *loc);
        assert_eq!(s.valuation, vec![x.clone(), y.clone()]);
    }
}

#[test]
fn qualitative_refusal_on_non_cycle_reset() {
    let h = load("cycle2.shs");
    let target = h.targets["hit_l2"].clone();
    match decide_qualitative(&h, &target, 50) {
        Err(AnalysisError::NotCycleReset { witness }) => {
            assert!(!witness.is_empty());
        }
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn qualitative_verdicts_on_strong_variant() {
    let h = load("cycle2_strong.shs");
    let report = decide_qualitative(&h, &h.targets["hit_l2"].clone(), 50).unwrap();
    assert_eq!(report.verdict, Verdict::AlmostSure);
    assert!(report.diagnostics.cycle_reset);
    assert!(report.diagnostics.abstraction.is_some());

    // A target that is unreachable under the dynamics.
    let report = decide_qualitative(&h, &h.targets["deep_left"].clone(), 50).unwrap();
    assert_eq!(report.verdict, Verdict::Zero);
}

#[test]
fn cap_exceeded_on_drifting_counter() {
    let h = load("drift.shs");
    match decide_qualitative(&h, &h.targets["goal"].clone(), 10) {
        Err(AnalysisError::NotCycleReset { .. }) => {}
        other => panic!("the drifting counter must refuse as non-cycle-reset, got {other:?}"),
    }
}

#[test]
fn simulation_hits_almost_sure_target() {
    let h = load("cycle2_strong.shs");
    let res = simulate(&h, &h.targets["hit_l2"].clone(), 1000, 2000, 7).unwrap();
    assert!(
        res.estimate > 0.995,
        "hit frequency {} too low for an almost-sure target",
        res.estimate
    );
    // Runs hit quickly: the mean hit step is small.
    let mean_steps: f64 = res
        .hit_steps
        .iter()
        .flatten()
        .map(|&s| s as f64)
        .sum::<f64>()
        / res.hits.max(1) as f64;
    assert!(mean_steps < 30.0, "mean hit step {mean_steps}");
}

#[test]
fn simulation_is_seed_deterministic() {
    let h = load("cycle2_strong.shs");
    let target = h.targets["hit_l2"].clone();
    let a = simulate(&h, &target, 100, 500, 42).unwrap();
    let b = simulate(&h, &target, 100, 500, 42).unwrap();
    assert_eq!(a.hits, b.hits);
    assert_eq!(a.hit_steps, b.hit_steps);
    let c = simulate(&h, &target, 100, 500, 43).unwrap();
    assert!(a.hit_steps != c.hit_steps, "different seeds should differ");

    // Full runs are bit-for-bit identical under the same seed.
    let r1 = sample_run(&h, &target, 50, 1234).unwrap();
    let r2 = sample_run(&h, &target, 50, 1234).unwrap();
    assert_eq!(r1.states, r2.states);
    assert_eq!(r1.delays, r2.delays);
}

#[test]
fn half_system_quantitative_interval() {
    let h = load("half.shs");
    let cfg = QuantConfig {
        eps: 1e-3,
        n_cap: 50,
        ..QuantConfig::default()
    };
    let report = approx_quantitative(&h, &h.targets["half"].clone(), &cfg).unwrap();
    let iv = report.prob_interval.expect("interval");
    assert!(iv.converged, "scheme must converge on the coin flip");
    let lo = decisive::finite::rational_to_f64(&iv.lo);
    let hi = decisive::finite::rational_to_f64(&iv.hi);
    assert!(hi - lo <= 1e-3 + 1e-12, "width {}", hi - lo);
    assert!(lo <= 0.5 && 0.5 <= hi, "[{lo}, {hi}] misses 1/2");
    // The verdict comes along for free and is neither zero nor almost-sure.
    assert_eq!(report.verdict, Verdict::PositiveNotAlmostSure);
}

#[test]
fn half_system_bracketing_with_simulation() {
    let h = load("half.shs");
    let target = h.targets["half"].clone();
    let cfg = QuantConfig {
        eps: 1e-3,
        n_cap: 50,
        ..QuantConfig::default()
    };
    let report = approx_quantitative(&h, &target, &cfg).unwrap();
    let iv = report.prob_interval.unwrap();
    let sim = simulate(&h, &target, 10, 20_000, 11).unwrap();
    let lo = decisive::finite::rational_to_f64(&iv.lo);
    let hi = decisive::finite::rational_to_f64(&iv.hi);
    assert!(
        sim.wilson_lo <= hi && lo <= sim.wilson_hi,
        "certified [{lo}, {hi}] and Wilson [{}, {}] do not overlap",
        sim.wilson_lo,
        sim.wilson_hi
    );
}

#[test]
fn quantitative_refuses_non_cycle_reset_and_bad_mode() {
    let h = load("walk.shs");
    let cfg = QuantConfig::default();
    match approx_quantitative(&h, &h.targets["ruin"].clone(), &cfg) {
        Err(AnalysisError::NotCycleReset { .. }) => {}
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn quantitative_zero_target() {
    let h = load("cycle2_strong.shs");
    let cfg = QuantConfig {
        eps: 1e-3,
        n_cap: 10,
        ..QuantConfig::default()
    };
    let report = approx_quantitative(&h, &h.targets["deep_left"].clone(), &cfg).unwrap();
    assert_eq!(report.verdict, Verdict::Zero);
    let iv = report.prob_interval.unwrap();
    assert!(iv.converged);
    let hi = decisive::finite::rational_to_f64(&iv.hi);
    assert!(hi <= 1e-3, "upper bound {hi} for an unreachable target");
}

#[test]
fn one_step_view_matches_sampler() {
    use rand::SeedableRng;
    let h = load("half.shs");
    let view = StsView::new(&h).unwrap();
    let start = State::new(h.location_index("start").unwrap(), vec![r(0, 1)]);
    let yes = h.location_index("yes").unwrap();
    let no = h.location_index("no").unwrap();
    let (p_yes, e_yes) = view
        .kernel_prob(&start, yes, &decisive::formula::Formula::True, 1e-8)
        .unwrap();
    let (p_no, e_no) = view
        .kernel_prob(&start, no, &decisive::formula::Formula::True, 1e-8)
        .unwrap();
    assert!((p_yes - 0.5).abs() <= e_yes + 1e-9, "p_yes = {p_yes}");
    assert!((p_no - 0.5).abs() <= e_no + 1e-9, "p_no = {p_no}");
    assert!((p_yes + p_no - 1.0).abs() <= e_yes + e_no + 1e-6);

    // Sampler frequencies agree within 3σ over 10k draws.
    let compiled = Compiled::new(&h).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let n = 10_000;
    let mut hits = 0;
    for _ in 0..n {
        let (next, _, _) = mixed_step(&compiled, &start, &mut rng).unwrap();
        if next.location == yes {
            hits += 1;
        }
    }
    let freq = hits as f64 / n as f64;
    let sigma = (0.5 * 0.5 / n as f64).sqrt();
    assert!((freq - 0.5).abs() <= 3.0 * sigma, "freq {freq}");
}

#[test]
fn dirac_state_kernel_is_discrete() {
    // At a Dirac-delay state the evaluator equals the exact edge-choice
    // computation.
    let h = load("cycle2.shs");
    let view = StsView::new(&h).unwrap();
    let s = State::new(h.location_index("l1").unwrap(), vec![r(2, 5), r(2, 5)]);
    let l2 = h.location_index("l2").unwrap();
    let (p, e) = view
        .kernel_prob(&s, l2, &decisive::formula::Formula::True, 1e-9)
        .unwrap();
    assert!((p - 1.0).abs() <= e + 1e-12);
    // And the landing point is exactly (1, 0): a point target carries the
    // full mass under the deterministic reset.
    let vars: Vec<String> = h.vars.clone();
    let q = decisive::formula::parse_formula("x = 1 & y = 0", &vars).unwrap();
    let (p, e) = view.kernel_prob(&s, l2, &q, 1e-9).unwrap();
    assert!((p - 1.0).abs() <= e + 1e-12);
}
