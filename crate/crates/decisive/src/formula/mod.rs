//! First-order linear real arithmetic with exact rational constants.
//!
//! This is the definability substrate for everything else in the crate:
//! guards, invariants, resets, flows, delay sets and abstraction blocks are
//! all formulas of this fragment. The module provides parsing, evaluation,
//! quantifier elimination by Fourier–Motzkin (equalities eliminated by
//! substitution first), exact one-dimensional cell decomposition, and a
//! first-order non-empty-interior transformer.
//!
//! All arithmetic is exact rational; no floating point enters this module.
//! Every value is immutable and every operation is a pure function.

mod ast;
mod cells;
mod interior;
pub(crate) mod lex;
pub(crate) mod parser;
pub mod qe;
mod term;

pub use ast::{Atom, Formula, Rel};
pub use cells::{decompose_1d, CellDecomposition1D, OpenInterval};
pub use interior::{interior_nonempty_formula, interior_nonempty_formula_capped};
pub use parser::parse_formula;
pub use qe::{
    decide_sentence, decide_sentence_capped, eliminate_quantifiers,
    eliminate_quantifiers_capped, entails, equivalent, evaluate, satisfiable, simplify_qf,
    simplify_qf_capped, DEFAULT_ATOM_CAP,
};
pub use term::Term;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: u32, col: u32, msg: String },

    #[error("unknown variable '{name}' at {line}:{col}")]
    UnknownVariable { name: String, line: u32, col: u32 },

    #[error("non-linear product at {line}:{col}: the fragment only allows scalar multiples of variables")]
    NonLinear { line: u32, col: u32 },

    #[error("sentence expected, but '{name}' occurs free")]
    FreeVariablePresent { name: String },

    #[error("valuation does not bind variable '{name}'")]
    MissingVariable { name: String },

    #[error("quantifier present in a formula that must be quantifier-free")]
    QuantifierPresent,

    #[error("expected exactly one free variable '{expected}', found {found:?}")]
    WrongArity { expected: String, found: Vec<String> },

    #[error("quantifier elimination exceeded the atom budget ({atoms} > {cap})")]
    ResourceExceeded { atoms: usize, cap: usize },
}
