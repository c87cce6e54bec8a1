use std::collections::BTreeSet;

use super::ast::{fresh_name, Formula, Rel};
use super::qe::{eliminate_quantifiers_capped, DEFAULT_ATOM_CAP};
use super::term::Term;
use super::FormulaError;

/// Returns a quantifier-free formula over the remaining free variables of
/// `f` that holds exactly when the `bound_vars`-section of `f` has non-empty
/// interior in ℝ^|bound_vars|.
///
/// The interior predicate is first order: there is a center point and an
/// ε > 0 such that the whole max-norm ε-ball satisfies `f`. For definable
/// sets in this fragment, non-empty interior coincides with positive
/// Lebesgue measure, which is how the predicate is used by the stochastic
/// layers above.
pub fn interior_nonempty_formula(
    f: &Formula,
    bound_vars: &[String],
) -> Result<Formula, FormulaError> {
    interior_nonempty_formula_capped(f, bound_vars, DEFAULT_ATOM_CAP)
}

pub fn interior_nonempty_formula_capped(
    f: &Formula,
    bound_vars: &[String],
    cap: usize,
) -> Result<Formula, FormulaError> {
    let free = f.free_vars();
    // A bound variable absent from f spans a full ℝ factor: it never
    // changes whether the interior is empty, so it drops out.
    let effective: Vec<&String> = bound_vars.iter().filter(|v| free.contains(*v)).collect();
    if effective.is_empty() {
        return eliminate_quantifiers_capped(f, cap);
    }

    let mut taken: BTreeSet<String> = f.all_vars();
    taken.extend(bound_vars.iter().cloned());
    let eps = fresh_name("eps", &taken);
    taken.insert(eps.clone());
    let mut centers = Vec::new();
    for v in &effective {
        let c = fresh_name(&format!("c_{v}"), &taken);
        taken.insert(c.clone());
        centers.push(c);
    }

    // ball: ⋀ |v − c| < ε, expressed with two strict atoms per coordinate.
    let mut ball = Vec::new();
    for (v, c) in effective.iter().zip(&centers) {
        let diff = Term::var((*v).clone()).sub(&Term::var(c.clone()));
        ball.push(Formula::cmp(diff.clone(), Rel::Lt, Term::var(eps.clone())));
        ball.push(Formula::cmp(diff.neg(), Rel::Lt, Term::var(eps.clone())));
    }
    let mut inner = Formula::implies(Formula::and(ball), f.clone());
    for v in &effective {
        inner = Formula::forall((*v).clone(), inner);
    }
    let mut outer = Formula::and(vec![
        Formula::cmp(Term::constant(crate::rat(0, 1)), Rel::Lt, Term::var(eps.clone())),
        inner,
    ]);
    outer = Formula::exists(eps, outer);
    for c in centers.into_iter().rev() {
        outer = Formula::exists(c, outer);
    }
    eliminate_quantifiers_capped(&outer, cap)
}
