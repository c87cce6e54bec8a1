//! Reachability analysis for cycle-reset stochastic hybrid systems.
//!
//! The crate is organized in layers, bottom to top:
//!
//! - [`formula`]: first-order linear real arithmetic with exact rational
//!   coefficients — parsing, quantifier elimination (Fourier–Motzkin),
//!   one-dimensional cell decomposition, and a non-empty-interior
//!   transformer. Everything above is built on decided sentences of this
//!   fragment.
//! - [`shs`]: stochastic hybrid systems — model files, well-formedness
//!   validation, symbolic delay sets, the cycle-reset check, and the
//!   one-step positive-probability predicate.
//! - [`finite`]: exact analysis of finite Markov kernels — transformer,
//!   avoid-sets, attractors, exact reachability, the certified
//!   `[p_yes, 1 - p_no]` approximation scheme, and executable checkers for
//!   the decisiveness criterion.
//! - [`abstraction`]: stochastic partition refinement producing a finite
//!   qualitative abstraction of a cycle-reset system.
//! - [`analysis`]: the decision procedures — qualitative verdicts,
//!   certified quantitative approximation via the reset-chain
//!   decomposition, and a Monte Carlo simulator used as an independent
//!   statistical oracle.

pub mod abstraction;
pub mod analysis;
pub mod finite;
pub mod formula;
pub mod shs;

#[doc(hidden)]
pub mod testutil;

/// Exact rational scalar used throughout the crate.
pub type Rational = num_rational::BigRational;

/// Convenience constructor for small rationals.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}
