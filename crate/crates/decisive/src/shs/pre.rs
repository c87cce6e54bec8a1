use std::collections::BTreeMap;

use crate::formula::{
    eliminate_quantifiers, interior_nonempty_formula, simplify_qf, Formula, FormulaError, Term,
};

use super::semantics::{enabled_formula, reset_relation};
use super::{primed, HybridSystem, ResetSpec, TAU};

/// The one-step positive-probability predicate: a quantifier-free formula
/// `Pre⁺(x̄)` over the system variables that holds at exactly the states of
/// `src` from which one mixed transition lands in `{dst} × ⟦q⟧` with
/// positive probability.
///
/// Structure: for every edge `e: src → dst`, a post-delay valuation is a
/// "hit" when `e` is enabled there and its reset gives positive mass to
/// `⟦q⟧` — a witness point for deterministic and discrete resets, non-empty
/// interior of the reset section intersected with `⟦q⟧` for continuous
/// ones. Whether positive delay-probability is "some witness delay" or
/// "positive measure of delays" depends on the delay law: finite delay sets
/// carry discrete uniform laws (a point suffices), infinite ones carry
/// Lebesgue-equivalent laws (the good-delay set needs non-empty interior).
pub fn one_step_positive_formula(
    h: &HybridSystem,
    src: usize,
    dst: usize,
    q: &Formula,
) -> Result<Formula, FormulaError> {
    debug_assert!(q.is_quantifier_free());
    // Hit predicate over the post-delay valuation.
    let mut hits = Vec::new();
    for (ei, e) in h.edges_from(src) {
        if e.target != dst {
            continue;
        }
        let pos_reset = match &e.reset {
            ResetSpec::Identity => q.clone(),
            ResetSpec::DeterministicMap(terms) => {
                let bindings: BTreeMap<String, Term> = h
                    .vars
                    .iter()
                    .cloned()
                    .zip(terms.iter().cloned())
                    .collect();
                q.substitute(&bindings)
            }
            ResetSpec::DiscreteUniform(points) => Formula::or(
                points
                    .iter()
                    .map(|p| {
                        let bindings: BTreeMap<String, Term> = h
                            .vars
                            .iter()
                            .cloned()
                            .zip(p.iter().map(|v| Term::constant(v.clone())))
                            .collect();
                        q.substitute(&bindings)
                    })
                    .collect(),
            ),
            ResetSpec::ContinuousUniform(_) => {
                let rho = reset_relation(h, ei);
                let prime_bindings: BTreeMap<String, Term> = h
                    .vars
                    .iter()
                    .map(|v| (v.clone(), Term::var(primed(v))))
                    .collect();
                let q_primed = q.substitute(&prime_bindings);
                let primed_vars: Vec<String> = h.vars.iter().map(|v| primed(v)).collect();
                interior_nonempty_formula(&Formula::and(vec![rho, q_primed]), &primed_vars)?
            }
        };
        hits.push(Formula::and(vec![enabled_formula(h, ei)?, pos_reset]));
    }
    if hits.is_empty() {
        return Ok(Formula::False);
    }
    let hit = eliminate_quantifiers(&Formula::or(hits))?;

    // Pull back through the flow and conjoin delay feasibility.
    let tau_term = Term::var(TAU);
    let mut tau_binding = BTreeMap::new();
    tau_binding.insert(TAU.to_string(), tau_term);
    let flow_bindings: BTreeMap<String, Term> = h
        .vars
        .iter()
        .zip(&h.locations[src].flow)
        .map(|(v, t)| (v.clone(), t.clone()))
        .collect();
    let good_delay = hit.substitute(&flow_bindings);

    // Full delay set and the good-delay subset, both over (x̄, τ).
    let mut full_parts = Vec::new();
    let mut delay_ok: Option<Formula> = None;
    for (ei, _) in h.edges_from(src) {
        let f = super::semantics::delay_set_formula(h, src, ei).map_err(|e| match e {
            super::ModelError::Formula(f) => f,
            other => FormulaError::Syntax {
                line: 0,
                col: 0,
                msg: other.to_string(),
            },
        })?;
        full_parts.push(f);
        delay_ok.get_or_insert(Formula::True);
    }
    let full = Formula::or(full_parts);
    // The good-delay set must itself be a feasible delay: reuse the full
    // delay-set components by conjoining the hit predicate at the endpoint.
    let good = eliminate_quantifiers(&Formula::and(vec![full.clone(), good_delay]))?;

    let tau_name = vec![TAU.to_string()];
    let interior_full = interior_nonempty_formula(&full, &tau_name)?;
    let interior_good = interior_nonempty_formula(&good, &tau_name)?;
    let exists_good = eliminate_quantifiers(&Formula::exists(TAU, good))?;

    // Finite delay set: any witness delay carries positive mass.
    // Infinite delay set: the good delays need positive measure.
    let discrete_case = Formula::and(vec![
        Formula::not(interior_full.clone()).normalized(),
        exists_good,
    ]);
    let continuous_case = Formula::and(vec![interior_full, interior_good]);
    let pre = eliminate_quantifiers(&Formula::or(vec![discrete_case, continuous_case]))?;
    simplify_qf(&pre)
}
