//! Executable checkers for the decisiveness theory on finite chains.

use num_traits::Zero;

use super::{tarjan_scc, FiniteError, FiniteSts};
use crate::Rational;

/// Report of the bounded-below-visits check: if every distribution on `A`
/// reaches `B` with probability at least some `p > 0`, then runs cannot
/// visit `A` infinitely often while avoiding `B` forever.
#[derive(Debug, Clone)]
pub struct Lemma6Report {
    /// Whether `min_{s∈A} P_s(F B) > 0` (vacuously true for empty `A`).
    pub hypothesis_holds: bool,
    /// The uniform lower bound `p` (minimum over `A`); `None` for empty `A`.
    pub p: Option<Rational>,
    /// Exact `P_s(G¬B ∧ GF A)` per state.
    pub prob: Vec<Rational>,
}

impl Lemma6Report {
    pub fn prob_max(&self) -> Rational {
        self.prob
            .iter()
            .cloned()
            .max()
            .unwrap_or_else(Rational::zero)
    }
}

/// Computes the report: the hypothesis bound exactly, and
/// `P(G¬B ∧ GF A)` exactly as the probability of reaching — while avoiding
/// `B` — a closed strongly connected component inside `¬B` that intersects
/// `A` (runs absorbed by such a component visit all of its states
/// infinitely often almost surely; leaky components are left with
/// probability one).
pub fn check_lemma6(
    sts: &FiniteSts,
    a: &[usize],
    b: &[usize],
) -> Result<Lemma6Report, FiniteError> {
    let n = sts.n_states();
    let reach_b = sts.reach_prob_exact(b)?;
    let p = a.iter().map(|&s| reach_b[s].clone()).min();
    let hypothesis_holds = p.as_ref().map_or(true, |q| !q.is_zero());

    let d = closed_components_avoiding(sts, b)
        .into_iter()
        .filter(|comp| comp.iter().any(|s| a.contains(s)))
        .flatten()
        .collect::<Vec<usize>>();

    // Reach D while avoiding B: make B absorbing, then solve exactly.
    let prob = if d.is_empty() {
        vec![Rational::zero(); n]
    } else {
        let modified = absorb(sts, b)?;
        modified.reach_prob_exact(&d)?
    };
    Ok(Lemma6Report {
        hypothesis_holds,
        p,
        prob,
    })
}

/// Report of the attractor-based decisiveness criterion.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    /// Whether `A` is an attractor.
    pub attractor: bool,
    /// `A' = A ∖ B̃`, the states of `A` from which `B` is reachable.
    pub a_prime: Vec<usize>,
    /// `min_{s∈A'} P_s(F B)`; `None` when `A'` is empty (the bound is then
    /// vacuous).
    pub p: Option<Rational>,
    /// Whether the criterion's hypotheses hold (attractor and positive `p`).
    pub applicable: bool,
    /// When applicable: the outcome of the exact decisiveness check
    /// `P_s(F B ∨ F B̃) = 1` for every state.
    pub decisive_verified: Option<bool>,
}

/// Checks the criterion hypotheses and, when they hold, verifies the
/// asserted decisiveness exactly. The uniform bound over distributions on
/// `A'` is the minimum over its states (expectations over mixtures cannot
/// go below the pointwise minimum).
pub fn check_criterion(
    sts: &FiniteSts,
    a: &[usize],
    b: &[usize],
) -> Result<CriterionReport, FiniteError> {
    let attractor = sts.is_attractor(a);
    let btilde = sts.avoid_set(b);
    let a_prime: Vec<usize> = a.iter().copied().filter(|s| !btilde.contains(s)).collect();
    let reach_b = sts.reach_prob_exact(b)?;
    let p = a_prime.iter().map(|&s| reach_b[s].clone()).min();
    let p_positive = p.as_ref().map_or(true, |q| !q.is_zero());
    let applicable = attractor && p_positive;
    let decisive_verified = if applicable {
        let mut union: Vec<usize> = b.to_vec();
        union.extend(btilde.iter().copied());
        union.sort_unstable();
        union.dedup();
        let reach_union = sts.reach_prob_exact(&union)?;
        Some(reach_union.iter().all(num_traits::One::is_one))
    } else {
        None
    };
    Ok(CriterionReport {
        attractor,
        a_prime,
        p,
        applicable,
        decisive_verified,
    })
}

/// Closed strongly connected components of the chain that lie entirely
/// outside `B`: no positive-probability edge leaves the component at all
/// (in particular none into `B`).
fn closed_components_avoiding(sts: &FiniteSts, b: &[usize]) -> Vec<Vec<usize>> {
    let n = sts.n_states();
    let mut in_b = vec![false; n];
    for &s in b {
        in_b[s] = true;
    }
    // Subgraph induced on ¬B, with original indices preserved via mapping.
    let keep: Vec<usize> = (0..n).filter(|&s| !in_b[s]).collect();
    let mut local = vec![usize::MAX; n];
    for (i, &s) in keep.iter().enumerate() {
        local[s] = i;
    }
    let succ = sts.successors();
    let adj: Vec<Vec<usize>> = keep
        .iter()
        .map(|&s| {
            succ[s]
                .iter()
                .filter(|&&t| !in_b[t])
                .map(|&t| local[t])
                .collect()
        })
        .collect();
    tarjan_scc(&adj)
        .into_iter()
        .map(|comp| comp.into_iter().map(|i| keep[i]).collect::<Vec<usize>>())
        .filter(|comp: &Vec<usize>| {
            comp.iter()
                .all(|&s| succ[s].iter().all(|t| comp.contains(t)))
        })
        .collect()
}

fn absorb(sts: &FiniteSts, states: &[usize]) -> Result<FiniteSts, FiniteError> {
    use num_traits::One;
    let n = sts.n_states();
    let mut kernel = sts.kernel().clone();
    for &s in states {
        if s >= n {
            return Err(FiniteError::BadState { index: s, n });
        }
        for t in 0..n {
            kernel[s][t] = if s == t {
                Rational::one()
            } else {
                Rational::zero()
            };
        }
    }
    FiniteSts::new(kernel, sts.labels().cloned())
}
