//! The induced one-step kernel of a system, exposed both ways: as a sampler
//! of mixed transitions and as a numeric evaluator of `κ((ℓ,v), {ℓ'}×⟦q⟧)`.

use rand_chacha::ChaCha8Rng;

use crate::formula::Formula;
use crate::shs::{Compiled, HybridSystem, ResetSpec, State, TargetSpec, TAU};
use crate::Rational;

use super::boxes::{box_volume, extract_box};
use super::quadrature::QuadBudget;
use super::simulate::{mixed_step, to_f64};
use super::AnalysisError;

/// One-step view of the induced kernel.
pub struct StsView<'a> {
    compiled: Compiled<'a>,
}

impl<'a> StsView<'a> {
    pub fn new(h: &'a HybridSystem) -> Result<Self, AnalysisError> {
        Ok(StsView {
            compiled: Compiled::new(h)?,
        })
    }

    pub fn system(&self) -> &HybridSystem {
        self.compiled.h
    }

    /// Samples one mixed transition.
    pub fn sample_step(
        &self,
        state: &State,
        rng: &mut ChaCha8Rng,
    ) -> Result<State, AnalysisError> {
        mixed_step(&self.compiled, state, rng).map(|(next, _, _)| next)
    }

    /// Evaluates `κ((ℓ,v), {dst}×⟦q⟧)` numerically with an error bound.
    ///
    /// The delay dimension is handled exactly: within each maximal cell of
    /// the delay set where the enabled edge set is constant, the set of
    /// delays whose deterministic reset lands in `⟦q⟧` is itself decomposed
    /// exactly, and the density mass of those exact pieces is summed.
    /// Discrete resets contribute the exact fraction of their points inside
    /// `⟦q⟧`; box resets contribute the (volume-normalized) measure of
    /// `box ∩ ⟦q⟧`, exact in one dimension and quadrature-assisted above.
    pub fn kernel_prob(
        &self,
        state: &State,
        dst: usize,
        q: &Formula,
        tol: f64,
    ) -> Result<(f64, f64), AnalysisError> {
        let h = self.compiled.h;
        let (union, per_edge) = self.compiled.delay_set(state)?;
        if union.is_empty() {
            return Err(AnalysisError::BlockedState {
                state: h.format_state(state),
            });
        }
        let mut value = 0.0;
        let mut err = 0.0;
        if union.is_finite() {
            let w = 1.0 / union.points.len() as f64;
            for tau in &union.points {
                let enabled: Vec<usize> = per_edge
                    .iter()
                    .filter(|(_, cells)| cells.contains(tau))
                    .map(|(ei, _)| *ei)
                    .collect();
                let total: Rational = enabled
                    .iter()
                    .map(|&ei| h.edges[ei].weight.clone())
                    .sum();
                for &ei in &enabled {
                    if h.edges[ei].target != dst {
                        continue;
                    }
                    let ew = to_f64(&(&h.edges[ei].weight / &total));
                    let (p, pe) = self.reset_mass_at(state, ei, tau, q, tol)?;
                    value += w * ew * p;
                    err += w * ew * pe;
                }
            }
            return Ok((value, err));
        }

        // Continuous delay law.
        let bounded = union.is_bounded();
        let lambda = to_f64(&h.locations[state.location].delay.exp_rate);
        let total_len = union.total_length().map(|q| to_f64(&q));
        let z = if bounded {
            total_len.unwrap()
        } else {
            union
                .intervals
                .iter()
                .map(|iv| {
                    let a = iv.lo.as_ref().map(|q| to_f64(q)).unwrap_or(0.0).max(0.0);
                    let m_lo = (-lambda * a).exp();
                    match &iv.hi {
                        Some(hi) => m_lo - (-lambda * to_f64(hi)).exp(),
                        None => m_lo,
                    }
                })
                .sum()
        };
        let mass_of = |a: f64, b: f64| -> f64 {
            if bounded {
                (b - a) / z
            } else {
                ((-lambda * a).exp() - (-lambda * b.min(1e18)).exp()) / z
            }
        };

        for (ei, cells) in &per_edge {
            let e = &h.edges[*ei];
            if e.target != dst {
                continue;
            }
            for iv in &cells.intervals {
                // Edge weight is constant only where the enabled set is
                // constant; refine against the other edges.
                let mut cuts: Vec<Rational> = Vec::new();
                for (oi, ocells) in &per_edge {
                    if oi == ei {
                        continue;
                    }
                    for sub in &ocells.intervals {
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
                    pieces.push(crate::formula::OpenInterval {
                        lo: lo.clone(),
                        hi: Some(c.clone()),
                    });
                    lo = Some(c);
                }
                pieces.push(crate::formula::OpenInterval {
                    lo,
                    hi: iv.hi.clone(),
                });
                for piece in pieces {
                    let mid = piece.sample();
                    let enabled: Vec<usize> = per_edge
                        .iter()
                        .filter(|(_, cs)| cs.contains(&mid))
                        .map(|(i, _)| *i)
                        .collect();
                    let total: Rational = enabled
                        .iter()
                        .map(|&i| h.edges[i].weight.clone())
                        .sum();
                    let ew = to_f64(&(&h.edges[*ei].weight / &total));
                    let (p, pe) = self.reset_mass_over_piece(state, *ei, &piece, q, tol, &mass_of)?;
                    value += ew * p;
                    err += ew * pe;
                }
            }
        }
        Ok((value, err))
    }

    /// Probability that the reset of `edge`, fired at the post-delay state
    /// `s + τ`, lands in `⟦q⟧` — for a concrete exact delay.
    fn reset_mass_at(
        &self,
        state: &State,
        edge: usize,
        tau: &Rational,
        q: &Formula,
        tol: f64,
    ) -> Result<(f64, f64), AnalysisError> {
        let h = self.compiled.h;
        let moved = super::simulate::elapse(h, state, tau);
        let e = &h.edges[edge];
        match &e.reset {
            ResetSpec::Identity => {
                Ok((q.eval(&h.valuation_map(&moved))? as u8 as f64, 0.0))
            }
            ResetSpec::DeterministicMap(terms) => {
                let bindings: std::collections::BTreeMap<String, crate::formula::Term> = h
                    .vars
                    .iter()
                    .cloned()
                    .zip(
                        moved
                            .valuation
                            .iter()
                            .map(|v| crate::formula::Term::constant(v.clone())),
                    )
                    .collect();
                let val: std::collections::BTreeMap<String, Rational> = h
                    .vars
                    .iter()
                    .cloned()
                    .zip(terms.iter().map(|t| {
                        t.substitute(&bindings).constant_part().clone()
                    }))
                    .collect();
                Ok((q.eval(&val)? as u8 as f64, 0.0))
            }
            ResetSpec::DiscreteUniform(points) => {
                let mut hits = 0usize;
                for p in points {
                    let val: std::collections::BTreeMap<String, Rational> =
                        h.vars.iter().cloned().zip(p.iter().cloned()).collect();
                    if q.eval(&val)? {
                        hits += 1;
                    }
                }
                Ok((hits as f64 / points.len() as f64, 0.0))
            }
            ResetSpec::ContinuousUniform(f) => self.box_mass(edge, f, q, tol),
        }
    }

    /// Measure under the reset box of `⟦q⟧`, for state-independent boxes.
    fn box_mass(
        &self,
        edge: usize,
        reset_formula: &Formula,
        q: &Formula,
        tol: f64,
    ) -> Result<(f64, f64), AnalysisError> {
        let h = self.compiled.h;
        let bx = extract_box(h, reset_formula)?.ok_or_else(|| AnalysisError::UnsupportedReset {
            edge: h.edges[edge].name.clone(),
        })?;
        let vol = to_f64(&box_volume(&bx));
        let budget = QuadBudget::new(50_000_000);
        let (v, e) = section_measure(h, &bx, 0, &mut Vec::new(), q, tol, &budget)?;
        Ok((v / vol, e / vol))
    }

    /// Exact-in-the-last-dimension measure of `⟦q⟧ ∩ box`: outer dimensions
    /// by adaptive quadrature, the innermost by exact 1D decomposition.
    fn reset_mass_over_piece(
        &self,
        state: &State,
        edge: usize,
        piece: &crate::formula::OpenInterval,
        q: &Formula,
        tol: f64,
        mass_of: &impl Fn(f64, f64) -> f64,
    ) -> Result<(f64, f64), AnalysisError> {
        let h = self.compiled.h;
        let e = &h.edges[edge];
        let (a, b) = (
            piece.lo.as_ref().map(|x| to_f64(x)).unwrap_or(0.0).max(0.0),
            piece
                .hi
                .as_ref()
                .map(|x| to_f64(x))
                .unwrap_or_else(|| {
                    let lo = piece.lo.as_ref().map(|x| to_f64(x)).unwrap_or(0.0);
                    lo + 60.0
                }),
        );
        match &e.reset {
            ResetSpec::Identity | ResetSpec::DeterministicMap(_) => {
                // Pull q back through reset ∘ flow: a univariate formula in
                // the delay, decomposed exactly inside the piece.
                let mut bindings: std::collections::BTreeMap<String, crate::formula::Term> = h
                    .vars
                    .iter()
                    .cloned()
                    .zip(
                        state
                            .valuation
                            .iter()
                            .map(|v| crate::formula::Term::constant(v.clone())),
                    )
                    .collect();
                bindings.insert(
                    TAU.to_string(),
                    crate::formula::Term::var(TAU),
                );
                let flow_terms: Vec<crate::formula::Term> = h.locations[state.location]
                    .flow
                    .iter()
                    .map(|t| t.substitute(&bindings))
                    .collect();
                let post: std::collections::BTreeMap<String, crate::formula::Term> =
                    match &e.reset {
                        ResetSpec::Identity => h
                            .vars
                            .iter()
                            .cloned()
                            .zip(flow_terms.iter().cloned())
                            .collect(),
                        ResetSpec::DeterministicMap(terms) => {
                            let flow_bind: std::collections::BTreeMap<
                                String,
                                crate::formula::Term,
                            > = h
                                .vars
                                .iter()
                                .cloned()
                                .zip(flow_terms.iter().cloned())
                                .collect();
                            h.vars
                                .iter()
                                .cloned()
                                .zip(terms.iter().map(|t| t.substitute(&flow_bind)))
                                .collect()
                        }
                        _ => unreachable!(),
                    };
                let pulled = q.substitute(&post).normalized();
                let cells = crate::formula::decompose_1d(&pulled, TAU)?;
                let mut mass = 0.0;
                for sub in &cells.intervals {
                    let lo = sub
                        .lo
                        .as_ref()
                        .map(|x| to_f64(x))
                        .unwrap_or(f64::NEG_INFINITY)
                        .max(a);
                    let hi = sub
                        .hi
                        .as_ref()
                        .map(|x| to_f64(x))
                        .unwrap_or(f64::INFINITY)
                        .min(b);
                    if hi > lo {
                        mass += mass_of(lo, hi);
                    }
                }
                Ok((mass, 1e-13))
            }
            ResetSpec::DiscreteUniform(points) => {
                let mut hits = 0usize;
                for p in points {
                    let val: std::collections::BTreeMap<String, Rational> =
                        h.vars.iter().cloned().zip(p.iter().cloned()).collect();
                    if q.eval(&val)? {
                        hits += 1;
                    }
                }
                let frac = hits as f64 / points.len() as f64;
                Ok((frac * mass_of(a, b), 1e-13))
            }
            ResetSpec::ContinuousUniform(f) => {
                let (p, pe) = self.box_mass(edge, f, q, tol)?;
                Ok((p * mass_of(a, b), pe + 1e-13))
            }
        }
    }
}

/// Measure of `⟦q⟧` inside a box: recursion over dimensions with the last
/// dimension decomposed exactly.
fn section_measure(
    h: &HybridSystem,
    bx: &[(Rational, Rational)],
    dim: usize,
    coords: &mut Vec<Rational>,
    q: &Formula,
    tol: f64,
    budget: &QuadBudget,
) -> Result<(f64, f64), AnalysisError> {
    use crate::formula::Term;
    let n = bx.len();
    if dim + 1 == n {
        // Substitute the outer coordinates and decompose exactly in the
        // last variable.
        let mut bindings: std::collections::BTreeMap<String, Term> = std::collections::BTreeMap::new();
        for (v, c) in h.vars.iter().zip(coords.iter()) {
            bindings.insert(v.clone(), Term::constant(c.clone()));
        }
        let last_var = h.vars[n - 1].clone();
        let section = q.substitute(&bindings).normalized();
        if !section.free_vars().is_empty() && !section.free_vars().contains(&last_var) {
            return Err(AnalysisError::Abstraction(format!(
                "target formula mentions unexpected variables: {section}"
            )));
        }
        let cells = match &section {
            Formula::True => {
                return Ok((to_f64(&(&bx[dim].1 - &bx[dim].0)), 0.0));
            }
            Formula::False => return Ok((0.0, 0.0)),
            other => crate::formula::decompose_1d(other, &last_var)?,
        };
        let (lo, hi) = (to_f64(&bx[dim].0), to_f64(&bx[dim].1));
        let mut mass = 0.0;
        for iv in &cells.intervals {
            let a = iv.lo.as_ref().map(|x| to_f64(x)).unwrap_or(f64::NEG_INFINITY).max(lo);
            let b = iv.hi.as_ref().map(|x| to_f64(x)).unwrap_or(f64::INFINITY).min(hi);
            if b > a {
                mass += b - a;
            }
        }
        return Ok((mass, 0.0));
    }
    let (lo, hi) = (to_f64(&bx[dim].0), to_f64(&bx[dim].1));
    let mut inner_err: Option<AnalysisError> = None;
    let result = super::quadrature::integrate_adaptive(
        |x| {
            if inner_err.is_some() {
                return (0.0, 0.0);
            }
            coords.push(super::simulate::from_f64(x));
            let r = section_measure(h, bx, dim + 1, coords, q, tol, budget);
            coords.pop();
            match r {
                Ok(ve) => ve,
                Err(e) => {
                    inner_err = Some(e);
                    (0.0, 0.0)
                }
            }
        },
        lo,
        hi,
        tol,
        budget,
    );
    if let Some(e) = inner_err {
        return Err(e);
    }
    result.map_err(|e| AnalysisError::QuadratureBudgetExceeded { evals: e.evals })
}

/// Probability of hitting each named target's location-set in one step,
/// summed over a partition of the successor space — used by tests to check
/// normalization of the kernel.
pub fn one_step_partition_mass(
    view: &StsView<'_>,
    state: &State,
    parts: &[(usize, Formula)],
    tol: f64,
) -> Result<(f64, f64), AnalysisError> {
    let mut total = 0.0;
    let mut err = 0.0;
    for (loc, q) in parts {
        let (v, e) = view.kernel_prob(state, *loc, q, tol)?;
        total += v;
        err += e;
    }
    let _ = TargetSpec::default();
    Ok((total, err))
}
