//! Stochastic hybrid systems: model representation, well-formedness
//! validation, symbolic delay sets, the cycle-reset check, and the one-step
//! positive-probability predicate used by partition refinement.
//!
//! A system has a finite set of locations with linear flows `γ_ℓ(x̄, τ)`,
//! guards/invariants/resets definable in linear real arithmetic, positive
//! rational edge weights, and derived delay distributions: discrete uniform
//! when the delay set is finite, Lebesgue-uniform when it is bounded with
//! interior, exponential (restricted) when unbounded.

mod graph;
mod parse;
mod pre;
mod semantics;

pub use graph::{cycle_reset_witness, is_cycle_reset, longest_nonstrong_path};
pub use parse::parse_model;
pub use pre::one_step_positive_formula;
pub use semantics::{
    delay_set, delay_set_formula, enabled_edges, enabled_formula, reset_relation, validate,
    Compiled, DelayClass, Diagnostic,
};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::formula::{Formula, FormulaError, Term};
use crate::Rational;

/// Reserved name of the delay variable inside flow terms.
pub const TAU: &str = "tau";

/// Post-state name of a variable inside reset relations: `x` becomes `x'`.
pub fn primed(v: &str) -> String {
    format!("{v}'")
}

#[derive(Debug, Clone, Error)]
pub enum ModelError {
    #[error(transparent)]
    Formula(#[from] FormulaError),

    #[error("model error at line {line}: {msg}")]
    Parse { line: u32, msg: String },

    #[error("unknown location '{0}'")]
    UnknownLocation(String),

    #[error("model is not well formed:\n{}", .0.iter().map(|d| format!("  - {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

/// Per-location delay parameters. The delay law itself is derived from the
/// delay set of each state; the rate only matters when that set is
/// unbounded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelaySpec {
    pub exp_rate: Rational,
}

impl Default for DelaySpec {
    fn default() -> Self {
        DelaySpec {
            exp_rate: crate::rat(1, 1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Location {
    pub name: String,
    /// One linear term per system variable, over the variables and [`TAU`].
    pub flow: Vec<Term>,
    pub invariant: Formula,
    pub delay: DelaySpec,
}

/// Reset behavior of an edge. Deterministic kinds relate post-state to
/// pre-state; stochastic kinds carry their support explicitly.
#[derive(Debug, Clone)]
pub enum ResetSpec {
    Identity,
    /// One term per variable, over the pre-state variables.
    DeterministicMap(Vec<Term>),
    /// Uniform choice among explicit rational points.
    DiscreteUniform(Vec<Vec<Rational>>),
    /// Uniform (Lebesgue) choice on the set defined by a formula over the
    /// pre-state variables and the primed post-state variables.
    ContinuousUniform(Formula),
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub name: String,
    pub source: usize,
    pub target: usize,
    pub guard: Formula,
    pub reset: ResetSpec,
    pub weight: Rational,
    pub strong: bool,
}

#[derive(Debug, Clone)]
pub enum InitKind {
    /// Equal-weight choice among explicit points.
    Points(Vec<Vec<Rational>>),
    /// Lebesgue-uniform on a definable support with non-empty interior.
    Uniform(Formula),
}

#[derive(Debug, Clone)]
pub struct InitialSpec {
    pub location: usize,
    pub kind: InitKind,
}

/// A named target set, given per location as a quantifier-free formula.
#[derive(Debug, Clone, Default)]
pub struct TargetSpec {
    pub per_location: BTreeMap<usize, Formula>,
}

#[derive(Debug, Clone)]
pub struct HybridSystem {
    pub vars: Vec<String>,
    pub locations: Vec<Location>,
    pub edges: Vec<Edge>,
    pub init: InitialSpec,
    pub targets: BTreeMap<String, TargetSpec>,
}

/// A concrete state: location index plus exact valuation in variable order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub location: usize,
    pub valuation: Vec<Rational>,
}

impl State {
    pub fn new(location: usize, valuation: Vec<Rational>) -> Self {
        State {
            location,
            valuation,
        }
    }
}

impl HybridSystem {
    pub fn location_index(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.name == name)
    }

    pub fn edge_index(&self, name: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.name == name)
    }

    pub fn edges_from(&self, loc: usize) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.source == loc)
    }

    /// Valuation as a name → value map, for formula evaluation.
    pub fn valuation_map(&self, state: &State) -> BTreeMap<String, Rational> {
        self.vars
            .iter()
            .cloned()
            .zip(state.valuation.iter().cloned())
            .collect()
    }

    pub fn format_state(&self, state: &State) -> String {
        let vals: Vec<String> = state.valuation.iter().map(|q| q.to_string()).collect();
        format!(
            "({}, ({}))",
            self.locations[state.location].name,
            vals.join(", ")
        )
    }
}
