//! Certified quantitative reachability for cycle-reset systems.
//!
//! The bounded-step probabilities `p_yes(n)` and `p_no(n)` of the concrete
//! system are computed by a reset-chain decomposition: path segments
//! between strong resets have bounded length (the non-strong subgraph is
//! acyclic), segment probabilities are nested integrals over the segment's
//! delays (plus the strong reset's box dimensions), and continuations after
//! each strong reset depend only on the edge and the remaining step budget,
//! so they are memoized per `(strong edge, budget, mode)`.
//!
//! Membership in the avoid-set is decided through the stabilized partition:
//! a concrete state lies in the avoid-set iff its block has no abstract
//! path to a target block.
//!
//! All quadrature carries explicit absolute error bounds; the reported
//! interval `[p_yes − err, 1 − p_no + err]` is widened by the accumulated
//! budget, never silently trusted.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use crate::abstraction::{build_abstraction, to_finite_sts, AbstractSts};
use crate::finite::ProbInterval;
use crate::formula::{CellDecomposition1D, OpenInterval};
use crate::shs::{
    cycle_reset_witness, longest_nonstrong_path, Compiled, HybridSystem, InitKind, ResetSpec,
    State, TargetSpec,
};
use crate::Rational;

use super::boxes::{box_volume, extract_box};
use super::quadrature::{integrate_adaptive, QuadBudget, QuadratureExhausted};
use super::simulate::{elapse, from_f64, to_f64};
use super::{
    AbstractionStats, AnalysisError, Diagnostics, QuadratureStats, ReachReport, Verdict,
};

#[derive(Debug, Clone)]
pub struct QuantConfig {
    /// Target width of the certified interval.
    pub eps: f64,
    /// Step cap for the approximation scheme.
    pub n_cap: usize,
    /// Refinement cap for the supporting abstraction.
    pub abstraction_max_iter: usize,
    /// Integrand evaluation budget across the whole run.
    pub max_evals: u64,
}

impl Default for QuantConfig {
    fn default() -> Self {
        QuantConfig {
            eps: 1e-3,
            n_cap: 200,
            abstraction_max_iter: 200,
            max_evals: 200_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Mode {
    Yes,
    No,
}

/// Approximates the reachability probability of `target` with a certified
/// interval of width at most `cfg.eps` (when the scheme converges within
/// `cfg.n_cap` steps).
pub fn approx_quantitative(
    h: &HybridSystem,
    target: &TargetSpec,
    cfg: &QuantConfig,
) -> Result<ReachReport, AnalysisError> {
    if let Some(witness) = cycle_reset_witness(h) {
        return Err(AnalysisError::NotCycleReset { witness });
    }
    check_quant_mode(h, target)?;
    let abs = build_abstraction(h, target, cfg.abstraction_max_iter)?;
    let verdict = qualitative_verdict(&abs)?;

    let mut tol = cfg.eps / 32.0;
    let mut attempts = 0;
    loop {
        match run_scheme(h, target, &abs, cfg, tol) {
            Ok(outcome) => {
                let raw_gap = 1.0 - outcome.p_yes - outcome.p_no;
                let err_bound = outcome.err_yes + outcome.err_no;
                if !outcome.converged && raw_gap <= cfg.eps / 2.0 && attempts < 3 {
                    // The scheme itself has converged; the interval is too
                    // wide only because of quadrature slack. Tighten.
                    let _ = err_bound;
                    tol /= 16.0;
                    attempts += 1;
                    continue;
                }
                let lo = (outcome.p_yes - outcome.err_yes).clamp(0.0, 1.0);
                let hi = (1.0 - (outcome.p_no - outcome.err_no)).clamp(lo, 1.0);
                let interval = ProbInterval {
                    lo: from_f64(lo),
                    hi: from_f64(hi),
                    steps_used: outcome.steps,
                    converged: outcome.converged,
                };
                return Ok(ReachReport {
                    verdict,
                    prob_interval: Some(interval),
                    diagnostics: Diagnostics {
                        cycle_reset: true,
                        witness_cycle: None,
                        abstraction: Some(AbstractionStats {
                            blocks: abs.blocks.len(),
                            iterations: abs.iterations,
                        }),
                        quadrature: Some(QuadratureStats {
                            terms: outcome.terms,
                            budget_used: outcome.err_yes + outcome.err_no,
                        }),
                        simulation: None,
                        segment_bound: longest_nonstrong_path(h),
                    },
                });
            }
            Err(AnalysisError::QuadratureBudgetExceeded { evals }) => {
                return Err(AnalysisError::QuadratureBudgetExceeded { evals })
            }
            Err(e) => return Err(e),
        }
    }
}

fn check_quant_mode(h: &HybridSystem, target: &TargetSpec) -> Result<(), AnalysisError> {
    for f in target.per_location.values() {
        if !f.is_quantifier_free() {
            return Err(AnalysisError::QuantModeViolation {
                edge: "<target>".into(),
                reason: "target formulas must be quantifier-free".into(),
            });
        }
    }
    for e in &h.edges {
        if e.strong {
            match &e.reset {
                ResetSpec::DiscreteUniform(_) => {}
                ResetSpec::ContinuousUniform(f) => {
                    if extract_box(h, f)?.is_none() {
                        return Err(AnalysisError::QuantModeViolation {
                            edge: e.name.clone(),
                            reason: "strong continuous reset must be a bounded box".into(),
                        });
                    }
                }
                ResetSpec::DeterministicMap(terms) if terms.iter().all(|t| t.is_constant()) => {}
                _ => {
                    return Err(AnalysisError::QuantModeViolation {
                        edge: e.name.clone(),
                        reason: "strong resets must be point lists or bounded boxes".into(),
                    })
                }
            }
        } else {
            match &e.reset {
                ResetSpec::Identity | ResetSpec::DeterministicMap(_) => {}
                _ => {
                    return Err(AnalysisError::QuantModeViolation {
                        edge: e.name.clone(),
                        reason: "non-strong edges must have deterministic resets".into(),
                    })
                }
            }
        }
    }
    if let InitKind::Uniform(f) = &h.init.kind {
        if extract_box(h, f)?.is_none() {
            return Err(AnalysisError::UnsupportedInit);
        }
    }
    Ok(())
}

fn qualitative_verdict(abs: &AbstractSts) -> Result<Verdict, AnalysisError> {
    let chain = to_finite_sts(abs)?;
    let can_reach = chain.backward_reach(&abs.target_blocks);
    if !abs.initial_support.iter().any(|&b| can_reach[b]) {
        return Ok(Verdict::Zero);
    }
    let avoid = chain.avoid_set(&abs.target_blocks);
    let to_avoid = chain.backward_reach(&avoid);
    if abs.initial_support.iter().all(|&b| !to_avoid[b]) {
        Ok(Verdict::AlmostSure)
    } else {
        Ok(Verdict::PositiveNotAlmostSure)
    }
}

struct SchemeOutcome {
    p_yes: f64,
    p_no: f64,
    err_yes: f64,
    err_no: f64,
    steps: usize,
    converged: bool,
    terms: u64,
}

fn run_scheme(
    h: &HybridSystem,
    target: &TargetSpec,
    abs: &AbstractSts,
    cfg: &QuantConfig,
    tol: f64,
) -> Result<SchemeOutcome, AnalysisError> {
    let engine = Engine::new(h, target, abs, tol, cfg.max_evals)?;
    let mut last = SchemeOutcome {
        p_yes: 0.0,
        p_no: 0.0,
        err_yes: 0.0,
        err_no: 0.0,
        steps: 0,
        converged: false,
        terms: 0,
    };
    for n in 0..=cfg.n_cap {
        let (py, ey) = engine.from_init(n as u32, Mode::Yes)?;
        let (pn, en) = engine.from_init(n as u32, Mode::No)?;
        last = SchemeOutcome {
            p_yes: py,
            p_no: pn,
            err_yes: ey,
            err_no: en,
            steps: n,
            converged: false,
            terms: engine.terms.get(),
        };
        let lo = (py - ey).clamp(0.0, 1.0);
        let hi = (1.0 - (pn - en)).clamp(0.0, 1.0);
        if hi - lo <= cfg.eps {
            last.converged = true;
            return Ok(last);
        }
    }
    Ok(last)
}

struct Engine<'a> {
    h: &'a HybridSystem,
    compiled: Compiled<'a>,
    target: &'a TargetSpec,
    abs: &'a AbstractSts,
    /// Per abstract block: no abstract path to a target block.
    in_avoid: Vec<bool>,
    reset_boxes: Vec<Option<Vec<(Rational, Rational)>>>,
    memo: RefCell<HashMap<(usize, u32, Mode), (f64, f64)>>,
    budget: QuadBudget,
    tol: f64,
    terms: Cell<u64>,
}

impl<'a> Engine<'a> {
    fn new(
        h: &'a HybridSystem,
        target: &'a TargetSpec,
        abs: &'a AbstractSts,
        tol: f64,
        max_evals: u64,
    ) -> Result<Self, AnalysisError> {
        let chain = to_finite_sts(abs)?;
        let can_reach = chain.backward_reach(&abs.target_blocks);
        let in_avoid = can_reach.iter().map(|&b| !b).collect();
        let mut reset_boxes = Vec::with_capacity(h.edges.len());
        for e in &h.edges {
            match &e.reset {
                ResetSpec::ContinuousUniform(f) => reset_boxes.push(extract_box(h, f)?),
                _ => reset_boxes.push(None),
            }
        }
        Ok(Engine {
            h,
            compiled: Compiled::new(h)?,
            target,
            abs,
            in_avoid,
            reset_boxes,
            memo: RefCell::new(HashMap::new()),
            budget: QuadBudget::new(max_evals),
            tol,
            terms: Cell::new(0),
        })
    }

    fn from_init(&self, n: u32, mode: Mode) -> Result<(f64, f64), AnalysisError> {
        match &self.h.init.kind {
            InitKind::Points(points) => {
                let w = 1.0 / points.len() as f64;
                let mut value = 0.0;
                let mut err = 0.0;
                for p in points {
                    let (v, e) =
                        self.prob_state(&State::new(self.h.init.location, p.clone()), n, mode)?;
                    value += w * v;
                    err += w * e;
                }
                Ok((value, err))
            }
            InitKind::Uniform(f) => {
                let bx = extract_box(self.h, f)?.ok_or(AnalysisError::UnsupportedInit)?;
                self.box_average(self.h.init.location, &bx, n, mode)
            }
        }
    }

    /// Volume-normalized average of the step probability over a box of
    /// post-reset (or initial) valuations: nested 1D adaptive quadrature.
    fn box_average(
        &self,
        loc: usize,
        bx: &[(Rational, Rational)],
        n: u32,
        mode: Mode,
    ) -> Result<(f64, f64), AnalysisError> {
        let vol = to_f64(&box_volume(bx));
        let mut coords: Vec<Rational> = Vec::with_capacity(bx.len());
        let (v, e) = self.box_rec(loc, bx, 0, &mut coords, n, mode)?;
        Ok((v / vol, e / vol))
    }

    fn box_rec(
        &self,
        loc: usize,
        bx: &[(Rational, Rational)],
        dim: usize,
        coords: &mut Vec<Rational>,
        n: u32,
        mode: Mode,
    ) -> Result<(f64, f64), AnalysisError> {
        if dim == bx.len() {
            return self.prob_state(&State::new(loc, coords.clone()), n, mode);
        }
        let (lo, hi) = (&bx[dim].0, &bx[dim].1);
        self.terms.set(self.terms.get() + 1);
        let mut inner_err: Option<AnalysisError> = None;
        let result = integrate_adaptive(
            |x| {
                if inner_err.is_some() {
                    return (0.0, 0.0);
                }
                coords.push(from_f64(x));
                let r = self.box_rec(loc, bx, dim + 1, coords, n, mode);
                coords.pop();
                match r {
                    Ok(ve) => ve,
                    Err(e) => {
                        inner_err = Some(e);
                        (0.0, 0.0)
                    }
                }
            },
            to_f64(lo),
            to_f64(hi),
            self.tol * to_f64(&(hi - lo)).max(1e-9),
            &self.budget,
        );
        if let Some(e) = inner_err {
            return Err(e);
        }
        result.map_err(exhausted)
    }

    fn in_target(&self, state: &State) -> Result<bool, AnalysisError> {
        match self.target.per_location.get(&state.location) {
            Some(f) => Ok(f.eval(&self.h.valuation_map(state))?),
            None => Ok(false),
        }
    }

    fn in_avoid_set(&self, state: &State) -> Result<bool, AnalysisError> {
        let val = self.h.valuation_map(state);
        for (i, b) in self.abs.blocks.iter().enumerate() {
            if b.location == state.location && b.formula.eval(&val)? {
                return Ok(self.in_avoid[i]);
            }
        }
        Err(AnalysisError::Abstraction(format!(
            "state {} is outside the stabilized partition",
            self.h.format_state(state)
        )))
    }

    /// `P_s(F^{≤m} B)` (Yes) or `P_s(¬B U^{≤m} B̃)` (No), with error bound.
    fn prob_state(&self, state: &State, m: u32, mode: Mode) -> Result<(f64, f64), AnalysisError> {
        if self.in_target(state)? {
            return Ok((if mode == Mode::Yes { 1.0 } else { 0.0 }, 0.0));
        }
        if self.in_avoid_set(state)? {
            return Ok((if mode == Mode::No { 1.0 } else { 0.0 }, 0.0));
        }
        if m == 0 {
            return Ok((0.0, 0.0));
        }
        let (union, per_edge) = self.compiled.delay_set(state)?;
        if union.is_empty() {
            return Err(AnalysisError::BlockedState {
                state: self.h.format_state(state),
            });
        }
        if union.is_finite() {
            // Discrete uniform over the delay points.
            let w = 1.0 / union.points.len() as f64;
            let mut value = 0.0;
            let mut err = 0.0;
            for tau in &union.points {
                let moved = elapse(self.h, state, tau);
                let enabled = enabled_at(&per_edge, tau);
                let (v, e) = self.edge_step(&moved, &enabled, m, mode)?;
                value += w * v;
                err += w * e;
            }
            return Ok((value, err));
        }
        // Continuous: refine the union intervals so the enabled set is
        // constant per sub-interval; isolated points carry no mass.
        let subcells = refine_cells(&union, &per_edge);
        if union.is_bounded() {
            let total = to_f64(&union.total_length().expect("bounded"));
            let mut value = 0.0;
            let mut err = 0.0;
            for (iv, enabled) in &subcells {
                let (a, b) = (
                    to_f64(iv.lo.as_ref().expect("bounded")),
                    to_f64(iv.hi.as_ref().expect("bounded")),
                );
                let (v, e) = self.cell_contribution(state, iv, enabled, m, mode, |_| 1.0 / total, a, b)?;
                value += v;
                err += e;
            }
            Ok((value, err))
        } else {
            let lambda = to_f64(&self.h.locations[state.location].delay.exp_rate);
            // Normalizing constant over the whole delay set.
            let mut z = 0.0;
            for (iv, _) in &subcells {
                let a = iv.lo.as_ref().map(|q| to_f64(q)).unwrap_or(0.0).max(0.0);
                let m_lo = (-lambda * a).exp();
                z += match &iv.hi {
                    Some(hi) => m_lo - (-lambda * to_f64(hi)).exp(),
                    None => m_lo,
                };
            }
            let mut value = 0.0;
            let mut err = 0.0;
            for (iv, enabled) in &subcells {
                let a = iv.lo.as_ref().map(|q| to_f64(q)).unwrap_or(0.0).max(0.0);
                // Unbounded cells are truncated where the remaining mass is
                // below the tolerance; the tail joins the error bound.
                let (b, tail) = match &iv.hi {
                    Some(hi) => (to_f64(hi), 0.0),
                    None => {
                        let t = a + (1.0 / lambda) * ((z / self.tol).ln()).max(1.0);
                        (t, (-lambda * t).exp() / z)
                    }
                };
                let density = move |tau: f64| lambda * (-lambda * tau).exp() / z;
                let (v, e) =
                    self.cell_contribution(state, iv, enabled, m, mode, density, a, b)?;
                value += v;
                err += e + tail;
            }
            Ok((value, err))
        }
    }

    /// Contribution of one constant-enabled-set delay cell, weighted by the
    /// delay density. Cells whose enabled edges are all strong have a
    /// piecewise-constant continuation, integrated in closed form against
    /// the density.
    #[allow(clippy::too_many_arguments)]
    fn cell_contribution(
        &self,
        state: &State,
        iv: &OpenInterval,
        enabled: &[usize],
        m: u32,
        mode: Mode,
        density: impl Fn(f64) -> f64,
        a: f64,
        b: f64,
    ) -> Result<(f64, f64), AnalysisError> {
        if enabled.is_empty() || b <= a {
            return Ok((0.0, 0.0));
        }
        let weights = self.edge_weights(enabled);
        let all_strong = enabled.iter().all(|&ei| self.h.edges[ei].strong);
        if all_strong {
            // Continuations do not depend on τ: multiply by the cell mass.
            let mass = self.density_mass(&density, a, b)?;
            let mut value = 0.0;
            let mut err = 0.0;
            for (&ei, w) in enabled.iter().zip(&weights) {
                let (v, e) = self.strong_continuation(ei, m - 1, mode)?;
                value += w * v;
                err += w * e;
            }
            return Ok((value * mass.0, err * mass.0 + mass.1));
        }
        self.terms.set(self.terms.get() + 1);
        let mut inner_err: Option<AnalysisError> = None;
        let result = integrate_adaptive(
            |tau| {
                if inner_err.is_some() {
                    return (0.0, 0.0);
                }
                let tau_q = from_f64(tau);
                if !iv.contains(&tau_q) {
                    return (0.0, 0.0);
                }
                let moved = elapse(self.h, state, &tau_q);
                match self.edge_step(&moved, enabled, m, mode) {
                    Ok((v, e)) => {
                        let d = density(tau);
                        (v * d, e * d)
                    }
                    Err(e) => {
                        inner_err = Some(e);
                        (0.0, 0.0)
                    }
                }
            },
            a,
            b,
            self.tol,
            &self.budget,
        );
        if let Some(e) = inner_err {
            return Err(e);
        }
        result.map_err(exhausted)
    }

    /// Mass of a density over [a, b], exactly for the constant (uniform)
    /// case and in closed form for the exponential case — both expressible
    /// by probing the density. The density here is either `c` (uniform) or
    /// `λ e^{-λτ}/Z`; integrating the latter uses the probe values at the
    /// endopints.
    fn density_mass(
        &self,
        density: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
    ) -> Result<(f64, f64), AnalysisError> {
        let da = density(a);
        let db = density(b);
        if (da - db).abs() <= 1e-12 * da.abs().max(db.abs()) {
            // Constant density.
            return Ok((da * (b - a), 0.0));
        }
        // Exponential: density(τ) = λ e^{-λτ}/Z with density(a)/density(b)
        // = e^{λ(b-a)} — the mass is (density(a) - density(b))/λ where λ is
        // recovered from the ratio.
        let lambda = (da / db).ln() / (b - a);
        Ok(((da - db) / lambda, 1e-14))
    }

    fn edge_weights(&self, enabled: &[usize]) -> Vec<f64> {
        let total: Rational = enabled
            .iter()
            .map(|&ei| self.h.edges[ei].weight.clone())
            .sum();
        enabled
            .iter()
            .map(|&ei| to_f64(&(&self.h.edges[ei].weight / &total)))
            .collect()
    }

    /// One switch step from a post-delay valuation with a known enabled
    /// set.
    fn edge_step(
        &self,
        moved: &State,
        enabled: &[usize],
        m: u32,
        mode: Mode,
    ) -> Result<(f64, f64), AnalysisError> {
        let weights = self.edge_weights(enabled);
        let mut value = 0.0;
        let mut err = 0.0;
        for (&ei, w) in enabled.iter().zip(&weights) {
            let e = &self.h.edges[ei];
            let (v, er) = if e.strong {
                self.strong_continuation(ei, m - 1, mode)?
            } else {
                let next_val = match &e.reset {
                    ResetSpec::Identity => moved.valuation.clone(),
                    ResetSpec::DeterministicMap(terms) => {
                        let bindings: std::collections::BTreeMap<String, crate::formula::Term> =
                            self.h
                                .vars
                                .iter()
                                .cloned()
                                .zip(
                                    moved
                                        .valuation
                                        .iter()
                                        .map(|q| crate::formula::Term::constant(q.clone())),
                                )
                                .collect();
                        terms
                            .iter()
                            .map(|t| t.substitute(&bindings).constant_part().clone())
                            .collect()
                    }
                    _ => unreachable!("checked by quant-mode validation"),
                };
                self.prob_state(&State::new(e.target, next_val), m - 1, mode)?
            };
            value += w * v;
            err += w * er;
        }
        Ok((value, err))
    }

    /// Memoized continuation after a strong edge: the post-reset
    /// distribution is state-independent.
    fn strong_continuation(
        &self,
        edge: usize,
        m: u32,
        mode: Mode,
    ) -> Result<(f64, f64), AnalysisError> {
        if let Some(&cached) = self.memo.borrow().get(&(edge, m, mode)) {
            return Ok(cached);
        }
        let e = &self.h.edges[edge];
        let result = match &e.reset {
            ResetSpec::DiscreteUniform(points) => {
                let w = 1.0 / points.len() as f64;
                let mut value = 0.0;
                let mut err = 0.0;
                for p in points {
                    let (v, er) = self.prob_state(&State::new(e.target, p.clone()), m, mode)?;
                    value += w * v;
                    err += w * er;
                }
                (value, err)
            }
            ResetSpec::DeterministicMap(terms) => {
                let point: Vec<Rational> =
                    terms.iter().map(|t| t.constant_part().clone()).collect();
                self.prob_state(&State::new(e.target, point), m, mode)?
            }
            ResetSpec::ContinuousUniform(_) => {
                let bx = self.reset_boxes[edge]
                    .as_ref()
                    .expect("checked by quant-mode validation");
                self.box_average(e.target, bx, m, mode)?
            }
            ResetSpec::Identity => unreachable!("identity resets are never strong"),
        };
        self.memo.borrow_mut().insert((edge, m, mode), result);
        Ok(result)
    }
}

fn enabled_at(per_edge: &[(usize, CellDecomposition1D)], tau: &Rational) -> Vec<usize> {
    per_edge
        .iter()
        .filter(|(_, cells)| cells.contains(tau))
        .map(|(ei, _)| *ei)
        .collect()
}

/// Splits the union's open intervals at every per-edge cell boundary so the
/// enabled edge set is constant per piece.
fn refine_cells(
    union: &CellDecomposition1D,
    per_edge: &[(usize, CellDecomposition1D)],
) -> Vec<(OpenInterval, Vec<usize>)> {
    let mut out = Vec::new();
    for iv in &union.intervals {
        let mut cuts: Vec<Rational> = Vec::new();
        for (_, cells) in per_edge {
            for p in &cells.points {
                if iv.contains(p) {
                    cuts.push(p.clone());
                }
            }
            for sub in &cells.intervals {
                for endpoint in [&sub.lo, &sub.hi].into_iter().flatten() {
                    if iv.contains(endpoint) {
                        cuts.push(endpoint.clone());
                    }
                }
            }
        }
        cuts.sort();
        cuts.dedup();
        let mut pieces = Vec::new();
        let mut lo = iv.lo.clone();
        for c in cuts {
            pieces.push(OpenInterval {
                lo: lo.clone(),
                hi: Some(c.clone()),
            });
            lo = Some(c);
        }
        pieces.push(OpenInterval {
            lo,
            hi: iv.hi.clone(),
        });
        for piece in pieces {
            let mid = piece.sample();
            let enabled = enabled_at(per_edge, &mid);
            out.push((piece, enabled));
        }
    }
    out
}

fn exhausted(e: QuadratureExhausted) -> AnalysisError {
    AnalysisError::QuadratureBudgetExceeded { evals: e.evals }
}
