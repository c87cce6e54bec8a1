//! Monte Carlo simulation of mixed transitions — the independent
//! statistical oracle for everything symbolic.
//!
//! A run alternates stochastic delays (sampled from the law derived from
//! the exact delay-set decomposition of the current state) and stochastic
//! edge jumps with resets. States stay exact rationals: every sampled f64
//! is converted to the rational it is.

use num_traits::ToPrimitive;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::formula::CellDecomposition1D;
use crate::shs::{Compiled, HybridSystem, ResetSpec, State, TargetSpec};
use crate::Rational;

use super::AnalysisError;

pub(crate) fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn from_f64(x: f64) -> Rational {
    Rational::from_float(x).expect("finite float")
}

/// One simulated run: visited states (including the initial one), the delay
/// of each step, and the first step index at which the target held.
#[derive(Debug, Clone)]
pub struct RunSample {
    pub states: Vec<State>,
    pub delays: Vec<Rational>,
    pub hit_step: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub samples: usize,
    pub horizon: usize,
    pub seed: u64,
    pub hits: usize,
    pub estimate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub hit_steps: Vec<Option<u32>>,
}

/// Wilson 95% score interval for a binomial proportion.
pub fn wilson_interval(hits: usize, samples: usize) -> (f64, f64) {
    if samples == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054_f64;
    let n = samples as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Draws a delay from the law derived from the delay set: uniform over the
/// points when the set is finite, length-weighted uniform over the
/// intervals when bounded, exponential-mass-weighted with inverse-transform
/// sampling when unbounded.
pub(crate) fn sample_delay(
    cells: &CellDecomposition1D,
    exp_rate: &Rational,
    rng: &mut ChaCha8Rng,
) -> Option<Rational> {
    if cells.is_empty() {
        return None;
    }
    if cells.is_finite() {
        let i = rng.gen_range(0..cells.points.len());
        return Some(cells.points[i].clone());
    }
    if cells.is_bounded() {
        let lengths: Vec<f64> = cells
            .intervals
            .iter()
            .map(|iv| to_f64(&iv.length().expect("bounded")))
            .collect();
        let total: f64 = lengths.iter().sum();
        let mut u = rng.gen_range(0.0..total);
        for (iv, len) in cells.intervals.iter().zip(&lengths) {
            if u <= *len || std::ptr::eq(iv, cells.intervals.last().unwrap()) {
                let frac = from_f64((u / len).clamp(0.0, 1.0));
                let lo = iv.lo.clone().expect("bounded");
                let hi = iv.hi.clone().expect("bounded");
                return Some(&lo + (&hi - &lo) * frac);
            }
            u -= len;
        }
        unreachable!("interval selection");
    }
    // Unbounded: exponential restricted to the interval part.
    let lambda = to_f64(exp_rate);
    let masses: Vec<f64> = cells
        .intervals
        .iter()
        .map(|iv| {
            let lo = iv.lo.as_ref().map(|q| to_f64(q)).unwrap_or(0.0).max(0.0);
            let m_lo = (-lambda * lo).exp();
            match &iv.hi {
                Some(hi) => m_lo - (-lambda * to_f64(hi)).exp(),
                None => m_lo,
            }
        })
        .collect();
    let total: f64 = masses.iter().sum();
    let mut u = rng.gen_range(0.0..total);
    for (iv, mass) in cells.intervals.iter().zip(&masses) {
        if u <= *mass || std::ptr::eq(iv, cells.intervals.last().unwrap()) {
            let lo = iv.lo.as_ref().map(|q| to_f64(q)).unwrap_or(0.0).max(0.0);
            let m_lo = (-lambda * lo).exp();
            let t = -((m_lo - u).max(f64::MIN_POSITIVE)).ln() / lambda;
            let t = t.max(lo);
            let t = match &iv.hi {
                Some(hi) => t.min(to_f64(hi)),
                None => t,
            };
            return Some(from_f64(t));
        }
        u -= mass;
    }
    unreachable!("mass selection");
}

/// Applies the flow of the state's location for an exact delay.
pub(crate) fn elapse(h: &HybridSystem, state: &State, delay: &Rational) -> State {
    let mut bindings: std::collections::BTreeMap<String, crate::formula::Term> = h
        .vars
        .iter()
        .cloned()
        .zip(
            state
                .valuation
                .iter()
                .map(|q| crate::formula::Term::constant(q.clone())),
        )
        .collect();
    bindings.insert(
        crate::shs::TAU.to_string(),
        crate::formula::Term::constant(delay.clone()),
    );
    let valuation = h.locations[state.location]
        .flow
        .iter()
        .map(|t| t.substitute(&bindings).constant_part().clone())
        .collect();
    State::new(state.location, valuation)
}

/// Samples a reset outcome. Continuous resets must be boxes over the primed
/// variables (the shipped models only use strong box resets).
fn sample_reset(
    h: &HybridSystem,
    edge: usize,
    pre: &State,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Rational>, AnalysisError> {
    let e = &h.edges[edge];
    match &e.reset {
        ResetSpec::Identity => Ok(pre.valuation.clone()),
        ResetSpec::DeterministicMap(terms) => {
            let bindings: std::collections::BTreeMap<String, crate::formula::Term> = h
                .vars
                .iter()
                .cloned()
                .zip(
                    pre.valuation
                        .iter()
                        .map(|q| crate::formula::Term::constant(q.clone())),
                )
                .collect();
            Ok(terms
                .iter()
                .map(|t| t.substitute(&bindings).constant_part().clone())
                .collect())
        }
        ResetSpec::DiscreteUniform(points) => {
            let i = rng.gen_range(0..points.len());
            Ok(points[i].clone())
        }
        ResetSpec::ContinuousUniform(f) => {
            let bx = super::boxes::extract_box(h, f)?.ok_or_else(|| {
                AnalysisError::UnsupportedReset {
                    edge: e.name.clone(),
                }
            })?;
            Ok(bx
                .iter()
                .map(|(lo, hi)| {
                    let u = from_f64(rng.gen_range(0.0..1.0));
                    lo + (hi - lo) * u
                })
                .collect())
        }
    }
}

/// One mixed transition: sampled delay, weighted edge choice among the
/// enabled edges, sampled reset. Returns the successor plus the delay and
/// edge taken.
pub fn mixed_step(
    compiled: &Compiled<'_>,
    state: &State,
    rng: &mut ChaCha8Rng,
) -> Result<(State, usize, Rational), AnalysisError> {
    let h = compiled.h;
    let (cells, _) = compiled.delay_set(state)?;
    let delay = sample_delay(&cells, &h.locations[state.location].delay.exp_rate, rng)
        .ok_or_else(|| AnalysisError::BlockedState {
            state: h.format_state(state),
        })?;
    let moved = elapse(h, state, &delay);
    let enabled = compiled.enabled_edges(&moved);
    if enabled.is_empty() {
        return Err(AnalysisError::BlockedState {
            state: h.format_state(&moved),
        });
    }
    let edge = if enabled.len() == 1 {
        enabled[0]
    } else {
        let weights: Vec<f64> = enabled
            .iter()
            .map(|&ei| to_f64(&h.edges[ei].weight))
            .collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.gen_range(0.0..total);
        let mut chosen = enabled[enabled.len() - 1];
        for (&ei, w) in enabled.iter().zip(&weights) {
            if u <= *w {
                chosen = ei;
                break;
            }
            u -= w;
        }
        chosen
    };
    let valuation = sample_reset(h, edge, &moved, rng)?;
    Ok((State::new(h.edges[edge].target, valuation), edge, delay))
}

/// Replays a run under forced delays: at each step the delay is given and
/// the unique enabled edge is taken (ambiguity is an error, so replays are
/// deterministic and exact).
pub fn replay_with_delays(
    h: &HybridSystem,
    start: &State,
    delays: &[Rational],
) -> Result<Vec<State>, AnalysisError> {
    let compiled = Compiled::new(h)?;
    let mut states = vec![start.clone()];
    let mut current = start.clone();
    for delay in delays {
        let moved = elapse(h, &current, delay);
        let enabled = compiled.enabled_edges(&moved);
        match enabled.as_slice() {
            [edge] => {
                let e = &h.edges[*edge];
                let valuation = match &e.reset {
                    ResetSpec::Identity => moved.valuation.clone(),
                    ResetSpec::DeterministicMap(terms) => {
                        let bindings: std::collections::BTreeMap<String, crate::formula::Term> =
                            h.vars
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
                    _ => {
                        return Err(AnalysisError::UnsupportedReset {
                            edge: e.name.clone(),
                        })
                    }
                };
                current = State::new(e.target, valuation);
                states.push(current.clone());
            }
            [] => {
                return Err(AnalysisError::BlockedState {
                    state: h.format_state(&moved),
                })
            }
            many => {
                return Err(AnalysisError::AmbiguousReplay {
                    state: h.format_state(&moved),
                    edges: many.iter().map(|&ei| h.edges[ei].name.clone()).collect(),
                })
            }
        }
    }
    Ok(states)
}

fn target_holds(h: &HybridSystem, target: &TargetSpec, state: &State) -> bool {
    match target.per_location.get(&state.location) {
        Some(f) => f
            .eval(&h.valuation_map(state))
            .expect("target formulas are quantifier-free over the system variables"),
        None => false,
    }
}

fn initial_state(h: &HybridSystem, rng: &mut ChaCha8Rng) -> Result<State, AnalysisError> {
    match &h.init.kind {
        crate::shs::InitKind::Points(points) => {
            let i = if points.len() == 1 {
                0
            } else {
                rng.gen_range(0..points.len())
            };
            Ok(State::new(h.init.location, points[i].clone()))
        }
        crate::shs::InitKind::Uniform(f) => {
            let bx = super::boxes::extract_box(h, f)?.ok_or(AnalysisError::UnsupportedInit)?;
            let valuation = bx
                .iter()
                .map(|(lo, hi)| {
                    let u = from_f64(rng.gen_range(0.0..1.0));
                    lo + (hi - lo) * u
                })
                .collect();
            Ok(State::new(h.init.location, valuation))
        }
    }
}

/// Samples one full run of at most `horizon` mixed steps, stopping early on
/// the first target hit.
pub fn sample_run(
    h: &HybridSystem,
    target: &TargetSpec,
    horizon: usize,
    seed: u64,
) -> Result<RunSample, AnalysisError> {
    let compiled = Compiled::new(h)?;
    sample_run_compiled(&compiled, target, horizon, seed)
}

pub(crate) fn sample_run_compiled(
    compiled: &Compiled<'_>,
    target: &TargetSpec,
    horizon: usize,
    seed: u64,
) -> Result<RunSample, AnalysisError> {
    let h = compiled.h;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = initial_state(h, &mut rng)?;
    let mut states = vec![current.clone()];
    let mut delays = Vec::new();
    if target_holds(h, target, &current) {
        return Ok(RunSample {
            states,
            delays,
            hit_step: Some(0),
        });
    }
    for step in 1..=horizon {
        let (next, _, delay) = mixed_step(compiled, &current, &mut rng)?;
        delays.push(delay);
        states.push(next.clone());
        current = next;
        if target_holds(h, target, &current) {
            return Ok(RunSample {
                states,
                delays,
                hit_step: Some(step),
            });
        }
    }
    Ok(RunSample {
        states,
        delays,
        hit_step: None,
    })
}

/// Runs `samples` independent runs with per-sample seeds derived from
/// `seed`, in parallel, aggregated in sample order. Fully reproducible.
pub fn simulate(
    h: &HybridSystem,
    target: &TargetSpec,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> Result<SimulationResult, AnalysisError> {
    let compiled = Compiled::new(h)?;
    let hit_steps: Vec<Option<u32>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let derived = seed
                .wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
                .wrapping_add(1);
            sample_run_compiled(&compiled, target, horizon, derived)
                .map(|run| run.hit_step.map(|s| s as u32))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let hits = hit_steps.iter().filter(|h| h.is_some()).count();
    let (wilson_lo, wilson_hi) = wilson_interval(hits, samples);
    Ok(SimulationResult {
        samples,
        horizon,
        seed,
        hits,
        estimate: hits as f64 / samples.max(1) as f64,
        wilson_lo,
        wilson_hi,
        hit_steps,
    })
}
