//! Top-level decision procedures: qualitative reachability verdicts,
//! certified quantitative approximation via the reset-chain decomposition,
//! one-step kernel views, and the Monte Carlo simulator.

pub(crate) mod boxes;
mod quadrature;
mod quant;
mod qualitative;
mod simulate;
mod view;

pub use quadrature::{integrate_adaptive, QuadBudget};
pub use quant::{approx_quantitative, QuantConfig};
pub use qualitative::decide_qualitative;
pub use simulate::{
    mixed_step, replay_with_delays, sample_run, simulate, wilson_interval, RunSample,
    SimulationResult,
};
pub use view::{one_step_partition_mass, StsView};

use thiserror::Error;

use crate::abstraction::{AbstractionError, IterationRecord};
use crate::finite::{FiniteError, ProbInterval};
use crate::formula::FormulaError;
use crate::shs::ModelError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("the system is not cycle-reset; witness cycle: {}", .witness.join(" -> "))]
    NotCycleReset { witness: Vec<String> },

    #[error("abstraction did not stabilize within {max_iter} iterations")]
    CapExceeded {
        max_iter: usize,
        trace: Vec<IterationRecord>,
    },

    #[error("quantitative mode restriction violated on edge '{edge}': {reason}")]
    QuantModeViolation { edge: String, reason: String },

    #[error("quadrature budget exhausted after {evals} integrand evaluations")]
    QuadratureBudgetExceeded { evals: u64 },

    #[error("blocked state encountered (validator gap): {state}")]
    BlockedState { state: String },

    #[error("replay is ambiguous at {state}: enabled edges {edges:?}")]
    AmbiguousReplay { state: String, edges: Vec<String> },

    #[error("reset of edge '{edge}' is not a box; sampling and closed-form integration need boxes")]
    UnsupportedReset { edge: String },

    #[error("continuous initial support is not a box")]
    UnsupportedInit,

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Formula(#[from] FormulaError),

    #[error(transparent)]
    Finite(#[from] FiniteError),

    #[error("abstraction failed: {0}")]
    Abstraction(String),
}

impl From<AbstractionError> for AnalysisError {
    fn from(e: AbstractionError) -> Self {
        match e {
            AbstractionError::CapExceeded {
                max_iter, trace, ..
            } => AnalysisError::CapExceeded { max_iter, trace },
            AbstractionError::Formula(f) => AnalysisError::Formula(f),
            AbstractionError::Finite(f) => AnalysisError::Finite(f),
            other => AnalysisError::Abstraction(other.to_string()),
        }
    }
}

/// Verdict of a reachability analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    AlmostSure,
    Zero,
    PositiveNotAlmostSure,
    Unknown,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::AlmostSure => "almost-sure",
            Verdict::Zero => "zero",
            Verdict::PositiveNotAlmostSure => "positive-not-almost-sure",
            Verdict::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AbstractionStats {
    pub blocks: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, Default)]
pub struct QuadratureStats {
    pub terms: u64,
    pub budget_used: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationStats {
    pub samples: usize,
    pub hits: usize,
    pub wilson: (f64, f64),
    pub seed: u64,
}

/// Diagnostics attached to every report.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub cycle_reset: bool,
    pub witness_cycle: Option<Vec<String>>,
    pub abstraction: Option<AbstractionStats>,
    pub quadrature: Option<QuadratureStats>,
    pub simulation: Option<SimulationStats>,
    /// Bound on path length between strong resets, when cycle-reset.
    pub segment_bound: Option<usize>,
}

/// The answer object of the decision procedures. Almost-sure and zero
/// verdicts are only ever produced for cycle-reset systems.
#[derive(Debug, Clone)]
pub struct ReachReport {
    pub verdict: Verdict,
    pub prob_interval: Option<ProbInterval>,
    pub diagnostics: Diagnostics,
}
