use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;

use crate::formula::{
    decide_sentence, eliminate_quantifiers, interior_nonempty_formula, simplify_qf,
    CellDecomposition1D, Formula, FormulaError, Rel, Term,
};
use crate::Rational;

use super::{primed, HybridSystem, InitKind, ModelError, ResetSpec, State, TAU};

/// The reset relation `ρ̂_e(x̄, x̄')` relating pre-state variables to primed
/// post-state variables.
pub fn reset_relation(h: &HybridSystem, edge: usize) -> Formula {
    let e = &h.edges[edge];
    match &e.reset {
        ResetSpec::Identity => Formula::and(
            h.vars
                .iter()
                .map(|v| Formula::cmp(Term::var(primed(v)), Rel::Eq, Term::var(v.clone())))
                .collect(),
        ),
        ResetSpec::DeterministicMap(terms) => Formula::and(
            h.vars
                .iter()
                .zip(terms)
                .map(|(v, t)| Formula::cmp(Term::var(primed(v)), Rel::Eq, t.clone()))
                .collect(),
        ),
        ResetSpec::DiscreteUniform(points) => Formula::or(
            points
                .iter()
                .map(|p| {
                    Formula::and(
                        h.vars
                            .iter()
                            .zip(p)
                            .map(|(v, q)| {
                                Formula::cmp(
                                    Term::var(primed(v)),
                                    Rel::Eq,
                                    Term::constant(q.clone()),
                                )
                            })
                            .collect(),
                    )
                })
                .collect(),
        ),
        ResetSpec::ContinuousUniform(f) => f.clone(),
    }
}

/// Substitution mapping each variable to its primed copy.
fn prime_map(h: &HybridSystem) -> BTreeMap<String, Term> {
    h.vars
        .iter()
        .map(|v| (v.clone(), Term::var(primed(v))))
        .collect()
}

/// Substitution mapping each variable to its flow term at elapsed time
/// `tau_term`.
fn flow_map(h: &HybridSystem, loc: usize, tau_term: &Term) -> BTreeMap<String, Term> {
    let mut tau_binding = BTreeMap::new();
    tau_binding.insert(TAU.to_string(), tau_term.clone());
    h.vars
        .iter()
        .zip(&h.locations[loc].flow)
        .map(|(v, t)| (v.clone(), t.substitute(&tau_binding)))
        .collect()
}

/// `Enabled_e(x̄)`: the invariant and guard hold, and some reset value lands
/// inside the target invariant. Quantifier-free.
pub fn enabled_formula(h: &HybridSystem, edge: usize) -> Result<Formula, FormulaError> {
    let e = &h.edges[edge];
    let rho = reset_relation(h, edge);
    let target_inv = h.locations[e.target].invariant.substitute(&prime_map(h));
    let mut exists_reset = Formula::and(vec![rho, target_inv]);
    for v in &h.vars {
        exists_reset = Formula::exists(primed(v), exists_reset);
    }
    let raw = Formula::and(vec![
        h.locations[e.source].invariant.clone(),
        e.guard.clone(),
        exists_reset,
    ]);
    simplify_qf(&eliminate_quantifiers(&raw)?)
}

/// The delay-feasibility part shared by all edges of a location:
/// `τ ≥ 0 ∧ ∀τ' (0 ≤ τ' ≤ τ → Inv(γ(x̄, τ')))`, quantifier-free over
/// `(x̄, τ)`.
fn delay_ok_formula(h: &HybridSystem, loc: usize) -> Result<Formula, FormulaError> {
    let tau = Term::var(TAU);
    let tp = format!("{TAU}'");
    let inv_along = h.locations[loc]
        .invariant
        .substitute(&flow_map(h, loc, &Term::var(tp.clone())));
    let range = Formula::and(vec![
        Formula::cmp(Term::constant(Rational::zero()), Rel::Le, Term::var(tp.clone())),
        Formula::cmp(Term::var(tp.clone()), Rel::Le, tau.clone()),
    ]);
    let raw = Formula::and(vec![
        Formula::cmp(Term::constant(Rational::zero()), Rel::Le, tau),
        Formula::forall(tp, Formula::implies(range, inv_along)),
    ]);
    eliminate_quantifiers(&raw)
}

/// The delay-set formula of `(ℓ, e)`: delays after which `e` can be taken.
/// Quantifier-free over `(x̄, τ)`.
pub fn delay_set_formula(
    h: &HybridSystem,
    loc: usize,
    edge: usize,
) -> Result<Formula, ModelError> {
    let e = &h.edges[edge];
    if e.source != loc {
        return Err(ModelError::Parse {
            line: 0,
            msg: format!("edge '{}' does not leave location '{}'", e.name, h.locations[loc].name),
        });
    }
    let enabled = enabled_formula(h, edge)?;
    let shifted = enabled.substitute(&flow_map(h, loc, &Term::var(TAU)));
    let delay_ok = delay_ok_formula(h, loc)?;
    let f = eliminate_quantifiers(&Formula::and(vec![delay_ok, shifted]))?;
    Ok(simplify_qf(&f)?)
}

/// Per-state delay sets: the union `I(s)` and each per-edge `I(s, e)` as
/// exact cell decompositions in the delay variable.
pub fn delay_set(
    h: &HybridSystem,
    state: &State,
) -> Result<(CellDecomposition1D, Vec<(usize, CellDecomposition1D)>), ModelError> {
    let compiled = Compiled::new(h)?;
    compiled.delay_set(state)
}

/// Edges enabled with zero delay at a state.
pub fn enabled_edges(h: &HybridSystem, state: &State) -> Result<Vec<usize>, ModelError> {
    let compiled = Compiled::new(h)?;
    Ok(compiled.enabled_edges(state))
}

/// How the delay distribution of a state is realized, per its delay set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DelayClass {
    /// Finite delay set: discrete uniform over its points.
    DiscreteUniform,
    /// Bounded with non-empty interior: Lebesgue-uniform.
    ContinuousUniform,
    /// Unbounded: exponential with the location's rate, restricted.
    ExponentialRestricted,
}

/// A validation finding; an empty report means the model is well formed.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// Checks well-formedness as decided sentences:
/// (a) non-blocking: every invariant state has a non-empty delay set;
/// (b) resets land inside the target invariant;
/// (c) strong flags are consistent (the reset relation must not mention
///     pre-state variables);
/// (d) continuous-uniform supports have non-empty interior wherever the
///     reset can fire, and likewise for a continuous initial support;
/// (e) flows are the identity at τ = 0;
/// plus basic structural checks (non-empty point lists, initial support
/// inside the invariant).
pub fn validate(h: &HybridSystem) -> Result<Vec<Diagnostic>, ModelError> {
    let mut out = Vec::new();
    let compiled = Compiled::new(h)?;

    // (e) flow identity at τ = 0.
    for loc in &h.locations {
        let mut zero = BTreeMap::new();
        zero.insert(TAU.to_string(), Term::constant(Rational::zero()));
        for (v, t) in h.vars.iter().zip(&loc.flow) {
            if t.substitute(&zero) != Term::var(v.clone()) {
                out.push(Diagnostic {
                    subject: format!("location {}", loc.name),
                    message: format!("flow for '{v}' is not the identity at {TAU} = 0"),
                });
            }
        }
    }

    // (a) non-blocking: ∀x̄ (Inv → ∃τ ⋁_e I_e(x̄, τ)).
    for (li, loc) in h.locations.iter().enumerate() {
        let union = Formula::or(
            h.edges_from(li)
                .map(|(ei, _)| compiled.delay_formula[ei].clone())
                .collect(),
        );
        let mut sentence = Formula::implies(loc.invariant.clone(), Formula::exists(TAU, union));
        for v in h.vars.iter().rev() {
            sentence = Formula::forall(v.clone(), sentence);
        }
        match decide_sentence(&sentence) {
            Ok(true) => {}
            Ok(false) => out.push(Diagnostic {
                subject: format!("location {}", loc.name),
                message: "non-blocking violated: some invariant state has an empty delay set"
                    .into(),
            }),
            Err(e) => return Err(e.into()),
        }
    }

    for (ei, e) in h.edges.iter().enumerate() {
        let rho = reset_relation(h, ei);

        // (b) reset image inside the target invariant.
        let target_inv = h.locations[e.target].invariant.substitute(&prime_map(h));
        let premise = Formula::and(vec![
            h.locations[e.source].invariant.clone(),
            e.guard.clone(),
            rho.clone(),
        ]);
        let mut sentence = Formula::implies(premise, target_inv);
        for v in h.vars.iter().rev() {
            sentence = Formula::forall(primed(v), sentence);
        }
        for v in h.vars.iter().rev() {
            sentence = Formula::forall(v.clone(), sentence);
        }
        match decide_sentence(&sentence) {
            Ok(true) => {}
            Ok(false) => out.push(Diagnostic {
                subject: format!("edge {}", e.name),
                message: "reset image escapes the target invariant".into(),
            }),
            Err(err) => return Err(err.into()),
        }

        // (c) strong flag consistency: state-independent reset relation.
        if e.strong {
            let free = rho.free_vars();
            if let Some(v) = h.vars.iter().find(|v| free.contains(*v)) {
                out.push(Diagnostic {
                    subject: format!("edge {}", e.name),
                    message: format!(
                        "flagged strong but its reset depends on pre-state variable '{v}'"
                    ),
                });
            }
        }

        // (d) continuous-uniform reset sections have interior wherever the
        // edge can fire.
        if let ResetSpec::ContinuousUniform(_) = &e.reset {
            let primed_vars: Vec<String> = h.vars.iter().map(|v| primed(v)).collect();
            let int = interior_nonempty_formula(&rho, &primed_vars)?;
            let premise = Formula::and(vec![
                h.locations[e.source].invariant.clone(),
                e.guard.clone(),
            ]);
            let mut sentence = Formula::implies(premise, int);
            for v in h.vars.iter().rev() {
                sentence = Formula::forall(v.clone(), sentence);
            }
            match decide_sentence(&sentence) {
                Ok(true) => {}
                Ok(false) => out.push(Diagnostic {
                    subject: format!("edge {}", e.name),
                    message: "continuous reset support has empty interior at some firing state"
                        .into(),
                }),
                Err(err) => return Err(err.into()),
            }
        }
        if let ResetSpec::DiscreteUniform(points) = &e.reset {
            if points.is_empty() {
                out.push(Diagnostic {
                    subject: format!("edge {}", e.name),
                    message: "discrete reset has an empty point list".into(),
                });
            }
        }
    }

    // Initial support checks.
    let init_inv = &h.locations[h.init.location].invariant;
    match &h.init.kind {
        InitKind::Points(points) => {
            for p in points {
                let val: BTreeMap<String, Rational> = h
                    .vars
                    .iter()
                    .cloned()
                    .zip(p.iter().cloned())
                    .collect();
                match init_inv.eval(&val) {
                    Ok(true) => {}
                    Ok(false) => out.push(Diagnostic {
                        subject: "init".into(),
                        message: format!(
                            "initial point ({}) violates the invariant",
                            p.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(", ")
                        ),
                    }),
                    Err(e) => return Err(e.into()),
                }
            }
        }
        InitKind::Uniform(d) => {
            let int = interior_nonempty_formula(d, &h.vars)?;
            match int {
                Formula::True => {}
                _ => out.push(Diagnostic {
                    subject: "init".into(),
                    message: "continuous initial support has empty interior".into(),
                }),
            }
            let mut sentence = Formula::implies(d.clone(), init_inv.clone());
            for v in h.vars.iter().rev() {
                sentence = Formula::forall(v.clone(), sentence);
            }
            match decide_sentence(&sentence) {
                Ok(true) => {}
                Ok(false) => out.push(Diagnostic {
                    subject: "init".into(),
                    message: "continuous initial support escapes the invariant".into(),
                }),
                Err(e) => return Err(e.into()),
            }
        }
    }

    Ok(out)
}

/// Per-system cache of the symbolic artifacts the hot paths need: the
/// quantifier-free enabled and delay-set formulas per edge.
pub struct Compiled<'a> {
    pub h: &'a HybridSystem,
    pub enabled: Vec<Formula>,
    pub delay_formula: Vec<Formula>,
}

impl<'a> Compiled<'a> {
    pub fn new(h: &'a HybridSystem) -> Result<Self, ModelError> {
        let mut enabled = Vec::with_capacity(h.edges.len());
        let mut delay_formula = Vec::with_capacity(h.edges.len());
        for (ei, e) in h.edges.iter().enumerate() {
            enabled.push(enabled_formula(h, ei)?);
            delay_formula.push(delay_set_formula(h, e.source, ei)?);
        }
        Ok(Compiled {
            h,
            enabled,
            delay_formula,
        })
    }

    /// Substitutes a state into the per-edge delay formulas and decomposes
    /// in the delay variable; the union is `I(s)`.
    pub fn delay_set(
        &self,
        state: &State,
    ) -> Result<(CellDecomposition1D, Vec<(usize, CellDecomposition1D)>), ModelError> {
        let bindings: BTreeMap<String, Term> = self
            .h
            .vars
            .iter()
            .cloned()
            .zip(state.valuation.iter().map(|q| Term::constant(q.clone())))
            .collect();
        let mut per_edge = Vec::new();
        let mut union: Option<Formula> = None;
        for (ei, _) in self.h.edges_from(state.location) {
            let univariate = self.delay_formula[ei].substitute(&bindings).normalized();
            union = Some(match union.take() {
                Some(u) => Formula::or(vec![u, univariate.clone()]),
                None => univariate.clone(),
            });
            let cells = crate::formula::decompose_1d(&univariate, TAU)?;
            per_edge.push((ei, cells));
        }
        let union_cells = match union {
            Some(u) => crate::formula::decompose_1d(&u, TAU)?,
            None => CellDecomposition1D::empty(),
        };
        Ok((union_cells, per_edge))
    }

    pub fn enabled_edges(&self, state: &State) -> Vec<usize> {
        let val = self.h.valuation_map(state);
        self.h
            .edges_from(state.location)
            .filter(|(ei, _)| {
                self.enabled[*ei]
                    .eval(&val)
                    .expect("enabled formulas are quantifier-free over the system variables")
            })
            .map(|(ei, _)| ei)
            .collect()
    }

    /// Classifies the delay law at a state from its delay set.
    pub fn delay_class(&self, cells: &CellDecomposition1D) -> DelayClass {
        if cells.is_finite() {
            DelayClass::DiscreteUniform
        } else if cells.is_bounded() {
            DelayClass::ContinuousUniform
        } else {
            DelayClass::ExponentialRestricted
        }
    }
}
