//! Exact analysis of finite stochastic transition systems.
//!
//! A [`FiniteSts`] is an explicit Markov kernel with exact rational entries.
//! This module provides the distribution transformer, avoid-sets, attractor
//! and reachability computations (exact, via fraction-free elimination), the
//! certified `[p_yes, 1 − p_no]` approximation scheme, and executable
//! checkers for the decisiveness criterion. These are the oracles the rest
//! of the crate is tested against, so everything here is exact — no
//! tolerances.

mod checks;
mod scc;
mod solve;

pub use checks::{check_criterion, check_lemma6, CriterionReport, Lemma6Report};
pub(crate) use scc::tarjan_scc;
pub use solve::solve_exact;

use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::Rational;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FiniteError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernel row {row} does not sum to 1")]
    BadRowSum { row: usize },

    #[error("negative entry at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize },

    #[error("state index {index} out of range (n = {n})")]
    BadState { index: usize, n: usize },

    #[error("linear system is singular (internal invariant violated)")]
    SingularSystem,

    #[error("cannot parse matrix: {0}")]
    Parse(String),
}

/// An explicit finite Markov kernel with exact rational entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteSts {
    kernel: Vec<Vec<Rational>>,
    labels: Option<Vec<String>>,
}

/// A probability distribution over the states of a [`FiniteSts`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateDist(pub Vec<Rational>);

impl StateDist {
    /// Dirac distribution at a state.
    pub fn dirac(n: usize, s: usize) -> Self {
        let mut v = vec![Rational::zero(); n];
        v[s] = Rational::one();
        StateDist(v)
    }

    pub fn uniform(n: usize) -> Self {
        StateDist(vec![crate::rat(1, n as i64); n])
    }

    pub fn mass_on(&self, states: &[usize]) -> Rational {
        states.iter().map(|&s| self.0[s].clone()).sum()
    }

    pub fn validate(&self) -> Result<(), FiniteError> {
        let sum: Rational = self.0.iter().cloned().sum();
        if !sum.is_one() {
            return Err(FiniteError::BadRowSum { row: 0 });
        }
        if let Some(col) = self.0.iter().position(|q| q.is_negative()) {
            return Err(FiniteError::NegativeEntry { row: 0, col });
        }
        Ok(())
    }
}

/// A certified probability interval produced by the approximation scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbInterval {
    pub lo: Rational,
    pub hi: Rational,
    pub steps_used: usize,
    pub converged: bool,
}

impl ProbInterval {
    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, p: &Rational) -> bool {
        &self.lo <= p && p <= &self.hi
    }
}

impl FiniteSts {
    /// Validates row-stochasticity: each row sums to exactly 1 with
    /// non-negative entries.
    pub fn new(kernel: Vec<Vec<Rational>>, labels: Option<Vec<String>>) -> Result<Self, FiniteError> {
        let n = kernel.len();
        for (i, row) in kernel.iter().enumerate() {
            if row.len() != n {
                return Err(FiniteError::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            let mut sum = Rational::zero();
            for (j, q) in row.iter().enumerate() {
                if q.is_negative() {
                    return Err(FiniteError::NegativeEntry { row: i, col: j });
                }
                sum += q;
            }
            if !sum.is_one() {
                return Err(FiniteError::BadRowSum { row: i });
            }
        }
        if let Some(ls) = &labels {
            if ls.len() != n {
                return Err(FiniteError::DimensionMismatch {
                    expected: n,
                    got: ls.len(),
                });
            }
        }
        Ok(FiniteSts { kernel, labels })
    }

    pub fn n_states(&self) -> usize {
        self.kernel.len()
    }

    pub fn kernel(&self) -> &Vec<Vec<Rational>> {
        &self.kernel
    }

    pub fn labels(&self) -> Option<&Vec<String>> {
        self.labels.as_ref()
    }

    /// Positive-probability successor lists (the qualitative graph).
    pub fn successors(&self) -> Vec<Vec<usize>> {
        self.kernel
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, q)| q.is_positive())
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect()
    }

    /// One-step transformation of a distribution: `μ ↦ μᵀ·K`, exact.
    pub fn transform(&self, mu: &StateDist) -> Result<StateDist, FiniteError> {
        let n = self.n_states();
        if mu.0.len() != n {
            return Err(FiniteError::DimensionMismatch {
                expected: n,
                got: mu.0.len(),
            });
        }
        let mut out = vec![Rational::zero(); n];
        for (s, mass) in mu.0.iter().enumerate() {
            if mass.is_zero() {
                continue;
            }
            for (t, p) in self.kernel[s].iter().enumerate() {
                if !p.is_zero() {
                    out[t] += mass * p;
                }
            }
        }
        Ok(StateDist(out))
    }

    /// The avoid-set of `B`: states from which no positive-probability path
    /// reaches `B`. Computed as the complement of backward reachability in
    /// the qualitative graph; states of `B` itself reach `B` in zero steps.
    pub fn avoid_set(&self, b: &[usize]) -> Vec<usize> {
        let reach = self.backward_reach(b);
        (0..self.n_states()).filter(|s| !reach[*s]).collect()
    }

    /// Characteristic vector of backward reachability from `set`.
    pub fn backward_reach(&self, set: &[usize]) -> Vec<bool> {
        let n = self.n_states();
        let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (s, row) in self.kernel.iter().enumerate() {
            for (t, q) in row.iter().enumerate() {
                if q.is_positive() {
                    pred[t].push(s);
                }
            }
        }
        let mut seen = vec![false; n];
        let mut queue: Vec<usize> = Vec::new();
        for &s in set {
            if !seen[s] {
                seen[s] = true;
                queue.push(s);
            }
        }
        while let Some(t) = queue.pop() {
            for &s in &pred[t] {
                if !seen[s] {
                    seen[s] = true;
                    queue.push(s);
                }
            }
        }
        seen
    }

    /// A set is an attractor iff its avoid-set is empty: on finite chains,
    /// reaching `A` almost surely from every state is equivalent to `A`
    /// being reachable from every state.
    pub fn is_attractor(&self, a: &[usize]) -> bool {
        self.avoid_set(a).is_empty()
    }

    /// Exact reachability probabilities `P_s(F B)` for all states: 1 on the
    /// states that cannot avoid `B`, 0 on the avoid-set, and the unique
    /// solution of the linear system in between.
    pub fn reach_prob_exact(&self, b: &[usize]) -> Result<Vec<Rational>, FiniteError> {
        let n = self.n_states();
        for &s in b {
            if s >= n {
                return Err(FiniteError::BadState { index: s, n });
            }
        }
        let in_b = mark(n, b);
        let btilde = self.avoid_set(b);
        let in_btilde = mark(n, &btilde);
        let unknown: Vec<usize> = (0..n).filter(|&s| !in_b[s] && !in_btilde[s]).collect();
        let mut result = vec![Rational::zero(); n];
        for &s in b {
            result[s] = Rational::one();
        }
        if unknown.is_empty() {
            return Ok(result);
        }
        let index: std::collections::HashMap<usize, usize> = unknown
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, i))
            .collect();
        let m = unknown.len();
        let mut a = vec![vec![Rational::zero(); m]; m];
        let mut rhs = vec![Rational::zero(); m];
        for (i, &s) in unknown.iter().enumerate() {
            a[i][i] = Rational::one();
            for (t, q) in self.kernel[s].iter().enumerate() {
                if q.is_zero() {
                    continue;
                }
                if in_b[t] {
                    rhs[i] += q;
                } else if let Some(&j) = index.get(&t) {
                    a[i][j] -= q;
                }
            }
        }
        let x = solve_exact(&a, &rhs)?;
        for (i, &s) in unknown.iter().enumerate() {
            result[s] = x[i].clone();
        }
        Ok(result)
    }

    /// Bounded-step probabilities of the approximation scheme:
    /// `p_yes(n) = P_μ(F^{≤n} B)` and `p_no(n) = P_μ(¬B U^{≤n} B̃)`, exact.
    /// Large step counts go through exact kernel powers instead of `n`
    /// vector applications.
    pub fn p_yes_no(
        &self,
        mu: &StateDist,
        b: &[usize],
        n: usize,
    ) -> Result<(Rational, Rational), FiniteError> {
        let mut scheme = ApproxScheme::new(self, mu, b)?;
        if n > 64 {
            return Ok((
                power_mass(&scheme.yes_kernel, &mu.0, &scheme.in_b, n),
                power_mass(&scheme.no_kernel, &mu.0, &scheme.in_btilde, n),
            ));
        }
        for _ in 0..n {
            scheme.step();
        }
        Ok((scheme.p_yes(), scheme.p_no()))
    }

    /// Iterates the scheme until `p_yes + p_no ≥ 1 − ε` (the certified
    /// interval `[p_yes, 1 − p_no]` then has width ≤ ε) or `n_cap` steps.
    ///
    /// Steps linearly at first, then checks geometrically spaced step
    /// counts computed by exact matrix squaring — slowly mixing chains
    /// would otherwise need thousands of vector steps with ever-growing
    /// rationals. Both schedules return exact values; only the reported
    /// `steps_used` granularity differs.
    pub fn approx_reach(
        &self,
        mu: &StateDist,
        b: &[usize],
        eps: &Rational,
        n_cap: usize,
    ) -> Result<ProbInterval, FiniteError> {
        let mut scheme = ApproxScheme::new(self, mu, b)?;
        let threshold = Rational::one() - eps;
        let linear_limit = 64.min(n_cap);
        let mut steps = 0usize;
        loop {
            if &(scheme.p_yes() + scheme.p_no()) >= &threshold {
                return Ok(ProbInterval {
                    lo: scheme.p_yes(),
                    hi: Rational::one() - scheme.p_no(),
                    steps_used: steps,
                    converged: true,
                });
            }
            if steps >= linear_limit {
                break;
            }
            scheme.step();
            steps += 1;
        }
        if steps >= n_cap {
            return Ok(ProbInterval {
                lo: scheme.p_yes(),
                hi: Rational::one() - scheme.p_no(),
                steps_used: steps,
                converged: false,
            });
        }
        // Doubling schedule on exact integer kernel powers. All heavy
        // values stay integers; the threshold test cross-multiplies, and
        // rationals are only constructed for the returned interval.
        let (yes_scaled, yes_base) = ScaledPower::base(&scheme.yes_kernel);
        let (no_scaled, no_base) = ScaledPower::base(&scheme.no_kernel);
        debug_assert_eq!(yes_scaled.denom, no_scaled.denom);
        let (mu_int, mu_den) = dist_as_integers(&mu.0);
        let mut yes_pow = yes_base;
        let mut no_pow = no_base;
        let mut cur = 1usize;
        let mut denom_pow = yes_scaled.denom.clone(); // denom^cur
        let mut checkpoint = 128usize;
        // threshold: (Y + N) / (mu_den · denom^cur) ≥ 1 − ε.
        let eps_num = eps.numer().clone();
        let eps_den = eps.denom().clone();
        loop {
            let at = checkpoint.min(n_cap);
            let (py_num, pn_num, full_den) = if at == checkpoint {
                while cur < at {
                    yes_pow = int_mat_mul(&yes_pow, &yes_pow);
                    no_pow = int_mat_mul(&no_pow, &no_pow);
                    denom_pow = &denom_pow * &denom_pow;
                    cur *= 2;
                }
                (
                    mass_numerator(&yes_pow, &mu_int, &scheme.in_b),
                    mass_numerator(&no_pow, &mu_int, &scheme.in_btilde),
                    &mu_den * &denom_pow,
                )
            } else {
                // The cap fell between powers of two: one square-and-multiply
                // run at exactly n_cap.
                let py = power_mass(&scheme.yes_kernel, &mu.0, &scheme.in_b, at);
                let pn = power_mass(&scheme.no_kernel, &mu.0, &scheme.in_btilde, at);
                let converged =
                    &(py.clone() + pn.clone()) >= &(Rational::one() - eps);
                return Ok(ProbInterval {
                    lo: py,
                    hi: Rational::one() - pn,
                    steps_used: at,
                    converged,
                });
            };
            // (Y + N) · eps_den ≥ (eps_den − eps_num) · full_den
            let lhs = (&py_num + &pn_num) * &eps_den;
            let rhs = (&eps_den - &eps_num) * &full_den;
            let converged = lhs >= rhs;
            if converged || at >= n_cap {
                let lo = reduced(py_num, full_den.clone());
                let hi = Rational::one() - reduced(pn_num, full_den);
                return Ok(ProbInterval {
                    lo,
                    hi,
                    steps_used: at,
                    converged,
                });
            }
            checkpoint *= 2;
        }
    }

    /// Plain floating-point value iteration for `P(F B)`, used as a coarse
    /// cross-check of the exact solver.
    pub fn value_iteration(&self, b: &[usize], tol: f64, max_iter: usize) -> Vec<f64> {
        let n = self.n_states();
        let in_b = mark(n, b);
        let kernel_f: Vec<Vec<f64>> = self
            .kernel
            .iter()
            .map(|row| row.iter().map(rational_to_f64).collect())
            .collect();
        let mut v = vec![0.0f64; n];
        for (s, flag) in in_b.iter().enumerate() {
            if *flag {
                v[s] = 1.0;
            }
        }
        for _ in 0..max_iter {
            let mut next = v.clone();
            let mut delta = 0.0f64;
            for s in 0..n {
                if in_b[s] {
                    continue;
                }
                let mut acc = 0.0;
                for (t, p) in kernel_f[s].iter().enumerate() {
                    if *p > 0.0 {
                        acc += p * v[t];
                    }
                }
                delta = delta.max((acc - v[s]).abs());
                next[s] = acc;
            }
            v = next;
            if delta < tol {
                break;
            }
        }
        v
    }

    /// Parses the plain text matrix format: one row per line, entries are
    /// rationals `p/q` (or integers / decimals) separated by whitespace.
    pub fn from_text(text: &str) -> Result<Self, FiniteError> {
        let mut kernel = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut row = Vec::new();
            for tok in line.split_whitespace() {
                row.push(parse_rational(tok).map_err(|e| {
                    FiniteError::Parse(format!("line {}: {e}", lineno + 1))
                })?);
            }
            kernel.push(row);
        }
        FiniteSts::new(kernel, None)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.kernel {
            let cells: Vec<String> = row.iter().map(|q| q.to_string()).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for FiniteSts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

fn mark(n: usize, set: &[usize]) -> Vec<bool> {
    let mut out = vec![false; n];
    for &s in set {
        out[s] = true;
    }
    out
}

/// Nearest f64 to an exact rational.
pub fn rational_to_f64(q: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    q.to_f64().unwrap_or(f64::NAN)
}

fn parse_rational(tok: &str) -> Result<Rational, String> {
    if let Some((n, d)) = tok.split_once('/') {
        let n: num_bigint::BigInt = n.parse().map_err(|_| format!("bad numerator '{n}'"))?;
        let d: num_bigint::BigInt = d.parse().map_err(|_| format!("bad denominator '{d}'"))?;
        if d.is_zero() {
            return Err("zero denominator".into());
        }
        Ok(Rational::new(n, d))
    } else if let Some((i, f)) = tok.split_once('.') {
        let int: num_bigint::BigInt = i.parse().map_err(|_| format!("bad number '{tok}'"))?;
        let frac: num_bigint::BigInt = f.parse().map_err(|_| format!("bad number '{tok}'"))?;
        let den = num_bigint::BigInt::from(10u32).pow(f.len() as u32);
        let sign = if i.starts_with('-') { -1 } else { 1 };
        Ok(Rational::from_integer(int) + Rational::new(frac * sign, den))
    } else {
        let n: num_bigint::BigInt = tok.parse().map_err(|_| format!("bad number '{tok}'"))?;
        Ok(Rational::from_integer(n))
    }
}

/// Incremental state of the `p_yes`/`p_no` scheme: two absorbing-modified
/// copies of the chain advanced in lock step.
///
/// For `p_yes`, `B` is made absorbing and `p_yes(n)` is the mass on `B`
/// after `n` steps. For `p_no`, both `B` and its avoid-set are absorbing:
/// mass can only enter the avoid-set along paths that never touched `B`, so
/// the mass on the avoid-set is exactly `P(¬B U^{≤n} B̃)`.
pub struct ApproxScheme {
    yes_kernel: Vec<Vec<Rational>>,
    no_kernel: Vec<Vec<Rational>>,
    yes_dist: Vec<Rational>,
    no_dist: Vec<Rational>,
    in_b: Vec<bool>,
    in_btilde: Vec<bool>,
    pub steps: usize,
}

impl ApproxScheme {
    pub fn new(sts: &FiniteSts, mu: &StateDist, b: &[usize]) -> Result<Self, FiniteError> {
        let n = sts.n_states();
        if mu.0.len() != n {
            return Err(FiniteError::DimensionMismatch {
                expected: n,
                got: mu.0.len(),
            });
        }
        let in_b = mark(n, b);
        let btilde = sts.avoid_set(b);
        let in_btilde = mark(n, &btilde);
        let absorb = |preds: &dyn Fn(usize) -> bool| -> Vec<Vec<Rational>> {
            let mut k = sts.kernel.clone();
            for s in 0..n {
                if preds(s) {
                    for t in 0..n {
                        k[s][t] = if s == t {
                            Rational::one()
                        } else {
                            Rational::zero()
                        };
                    }
                }
            }
            k
        };
        let in_b2 = in_b.clone();
        let yes_kernel = absorb(&|s| in_b2[s]);
        let in_b3 = in_b.clone();
        let in_bt3 = in_btilde.clone();
        let no_kernel = absorb(&|s| in_b3[s] || in_bt3[s]);
        Ok(ApproxScheme {
            yes_kernel,
            no_kernel,
            yes_dist: mu.0.clone(),
            no_dist: mu.0.clone(),
            in_b,
            in_btilde,
            steps: 0,
        })
    }

    pub fn step(&mut self) {
        self.yes_dist = apply(&self.yes_kernel, &self.yes_dist);
        self.no_dist = apply(&self.no_kernel, &self.no_dist);
        self.steps += 1;
    }

    pub fn p_yes(&self) -> Rational {
        self.yes_dist
            .iter()
            .zip(&self.in_b)
            .filter(|(_, f)| **f)
            .map(|(q, _)| q.clone())
            .sum()
    }

    pub fn p_no(&self) -> Rational {
        self.no_dist
            .iter()
            .zip(&self.in_btilde)
            .filter(|(_, f)| **f)
            .map(|(q, _)| q.clone())
            .sum()
    }
}

fn apply(kernel: &[Vec<Rational>], dist: &[Rational]) -> Vec<Rational> {
    let n = dist.len();
    let mut out = vec![Rational::zero(); n];
    for (s, mass) in dist.iter().enumerate() {
        if mass.is_zero() {
            continue;
        }
        for (t, p) in kernel[s].iter().enumerate() {
            if !p.is_zero() {
                out[t] += mass * p;
            }
        }
    }
    out
}

/// An exact stochastic matrix power held as an integer matrix over a
/// common denominator `denom^exp`. All heavy arithmetic stays in `BigInt`:
/// rational operations on entries this large spend their time in gcd
/// normalization.
struct ScaledPower {
    denom: num_bigint::BigInt,
}

impl ScaledPower {
    /// Kernel as `entries / denom` with `denom` the lcm of all entry
    /// denominators.
    fn base(kernel: &[Vec<Rational>]) -> (Self, Vec<Vec<num_bigint::BigInt>>) {
        use num_integer::Integer;
        let mut denom = num_bigint::BigInt::one();
        for row in kernel {
            for q in row {
                denom = denom.lcm(q.denom());
            }
        }
        let scale = Rational::from_integer(denom.clone());
        let base: Vec<Vec<num_bigint::BigInt>> = kernel
            .iter()
            .map(|row| row.iter().map(|q| (q * &scale).to_integer()).collect())
            .collect();
        (ScaledPower { denom }, base)
    }
}

fn int_mat_mul(
    a: &[Vec<num_bigint::BigInt>],
    b: &[Vec<num_bigint::BigInt>],
) -> Vec<Vec<num_bigint::BigInt>> {
    let n = a.len();
    let mut out = vec![vec![num_bigint::BigInt::zero(); n]; n];
    for i in 0..n {
        for (k, aik) in a[i].iter().enumerate() {
            if aik.is_zero() {
                continue;
            }
            for (j, bkj) in b[k].iter().enumerate() {
                if !bkj.is_zero() {
                    out[i][j] += aik * bkj;
                }
            }
        }
    }
    out
}

/// Integer numerator of the marked mass of `μ_int · M` (both integer).
fn mass_numerator(
    power: &[Vec<num_bigint::BigInt>],
    mu_int: &[num_bigint::BigInt],
    marked: &[bool],
) -> num_bigint::BigInt {
    let mut total = num_bigint::BigInt::zero();
    for (s, m) in mu_int.iter().enumerate() {
        if m.is_zero() {
            continue;
        }
        let mut row_sum = num_bigint::BigInt::zero();
        for (t, p) in power[s].iter().enumerate() {
            if marked[t] && !p.is_zero() {
                row_sum += p;
            }
        }
        total += m * row_sum;
    }
    total
}

/// Puts a distribution over a single integer denominator.
fn dist_as_integers(mu: &[Rational]) -> (Vec<num_bigint::BigInt>, num_bigint::BigInt) {
    use num_integer::Integer;
    let mut den = num_bigint::BigInt::one();
    for q in mu {
        den = den.lcm(q.denom());
    }
    let scale = Rational::from_integer(den.clone());
    (
        mu.iter().map(|q| (q * &scale).to_integer()).collect(),
        den,
    )
}

/// `num / den` in normal form, reducing powers of two by shifting instead
/// of a full gcd (the dominant case: dyadic kernels at long step counts).
fn reduced(num: num_bigint::BigInt, den: num_bigint::BigInt) -> Rational {
    use num_integer::Integer;
    if num.is_zero() {
        return Rational::zero();
    }
    let tz_den = den.trailing_zeros().unwrap_or(0);
    if den.clone() >> tz_den == num_bigint::BigInt::one() {
        // den is a power of two.
        let shift = num.trailing_zeros().unwrap_or(0).min(tz_den);
        return Rational::new_raw(num >> shift, den >> shift);
    }
    let g = num.gcd(&den);
    Rational::new_raw(num / &g, den / g)
}

/// `μ · Kⁿ` restricted to a marked set, via integer square-and-multiply.
fn power_mass(
    kernel: &[Vec<Rational>],
    mu: &[Rational],
    marked: &[bool],
    n: usize,
) -> Rational {
    let (scaled, base) = ScaledPower::base(kernel);
    let (mu_int, mu_den) = dist_as_integers(mu);
    let size = kernel.len();
    let mut result: Vec<Vec<num_bigint::BigInt>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| {
                    if i == j {
                        num_bigint::BigInt::one()
                    } else {
                        num_bigint::BigInt::zero()
                    }
                })
                .collect()
        })
        .collect();
    let mut result_exp = 0u32;
    let mut powered = base;
    let mut pow_exp = 1u32;
    let mut e = n;
    loop {
        if e & 1 == 1 {
            result = int_mat_mul(&result, &powered);
            result_exp += pow_exp;
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        powered = int_mat_mul(&powered, &powered);
        pow_exp *= 2;
    }
    let numerator = mass_numerator(&result, &mu_int, marked);
    let denominator = mu_den * scaled.denom.pow(result_exp);
    reduced(numerator, denominator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    fn chain(rows: &[&[(usize, i64, i64)]]) -> FiniteSts {
        let n = rows.len();
        let mut kernel = vec![vec![Rational::zero(); n]; n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, num, den) in *row {
                kernel[i][j] = rat(num, den);
            }
        }
        FiniteSts::new(kernel, None).unwrap()
    }

    #[test]
    fn transform_identity_and_swap() {
        let id = chain(&[&[(0, 1, 1)], &[(1, 1, 1)]]);
        let mu = StateDist(vec![rat(1, 3), rat(2, 3)]);
        assert_eq!(id.transform(&mu).unwrap(), mu);

        let swap = chain(&[&[(1, 1, 1)], &[(0, 1, 1)]]);
        let dirac = StateDist::dirac(2, 0);
        assert_eq!(swap.transform(&dirac).unwrap(), StateDist::dirac(2, 1));
    }

    #[test]
    fn transform_preserves_simplex() {
        use num_traits::One;
        let c = chain(&[&[(0, 1, 2), (1, 1, 2)], &[(0, 1, 3), (1, 2, 3)]]);
        let mut mu = StateDist(vec![rat(1, 4), rat(3, 4)]);
        for _ in 0..10 {
            mu = c.transform(&mu).unwrap();
            let s: Rational = mu.0.iter().cloned().sum();
            assert!(s.is_one());
        }
    }

    #[test]
    fn avoid_set_examples() {
        // B = all states → avoid-set empty.
        let c = chain(&[&[(0, 1, 1)], &[(1, 1, 1)]]);
        assert!(c.avoid_set(&[0, 1]).is_empty());

        // 0 ← 1 → 2 with 0 and 2 absorbing, B = {0}: only 2 avoids B.
        let c = chain(&[&[(0, 1, 1)], &[(0, 1, 2), (2, 1, 2)], &[(2, 1, 1)]]);
        assert_eq!(c.avoid_set(&[0]), vec![2]);
    }

    #[test]
    fn avoid_set_duality() {
        let c = chain(&[
            &[(0, 1, 2), (1, 1, 2)],
            &[(2, 1, 1)],
            &[(2, 1, 1)],
            &[(0, 1, 1)],
        ]);
        for b in [vec![0usize], vec![2], vec![1, 3], vec![]] {
            let btilde = c.avoid_set(&b);
            // B ∩ B̃ = ∅
            assert!(b.iter().all(|s| !btilde.contains(s)) || b.is_empty());
            // B̃ is closed under positive-probability successors.
            let succ = c.successors();
            for &s in &btilde {
                for &t in &succ[s] {
                    assert!(btilde.contains(&t));
                }
            }
        }
    }

    #[test]
    fn attractor_examples() {
        let c = chain(&[&[(1, 1, 1)], &[(0, 1, 1)]]);
        // Whole space is always an attractor.
        assert!(c.is_attractor(&[0, 1]));
        // Strongly connected chain: every non-empty set is an attractor.
        assert!(c.is_attractor(&[0]));
        assert!(c.is_attractor(&[1]));

        // Two disconnected absorbing states: neither alone is an attractor.
        let d = chain(&[&[(0, 1, 1)], &[(1, 1, 1)]]);
        assert!(!d.is_attractor(&[0]));
        assert!(!d.is_attractor(&[1]));
    }

    #[test]
    fn reach_prob_three_state() {
        // kernel [[1,0,0],[1/2,0,1/2],[0,0,1]], B = {0} → (1, 1/2, 0).
        let c = chain(&[&[(0, 1, 1)], &[(0, 1, 2), (2, 1, 2)], &[(2, 1, 1)]]);
        let p = c.reach_prob_exact(&[0]).unwrap();
        assert_eq!(p, vec![rat(1, 1), rat(1, 2), rat(0, 1)]);
    }

    #[test]
    fn reach_prob_matches_avoid_set_and_sure_states() {
        let c = chain(&[
            &[(1, 1, 2), (2, 1, 2)],
            &[(1, 1, 1)],
            &[(0, 1, 4), (2, 3, 4)],
            &[(0, 1, 1)],
        ]);
        let b = vec![1usize];
        let p = c.reach_prob_exact(&b).unwrap();
        let btilde = c.avoid_set(&b);
        let back = c.backward_reach(&btilde);
        for s in 0..4 {
            assert_eq!(p[s].is_zero(), btilde.contains(&s), "state {s}");
            assert_eq!(p[s].is_one(), !back[s], "state {s}");
        }
    }

    #[test]
    fn p_yes_no_base_cases() {
        let c = chain(&[&[(0, 1, 1)], &[(0, 1, 2), (1, 1, 2)]]);
        // μ concentrated on B: p_yes(0) = 1, p_no(0) = 0.
        let mu = StateDist::dirac(2, 0);
        let (py, pn) = c.p_yes_no(&mu, &[0], 0).unwrap();
        assert_eq!(py, rat(1, 1));
        assert_eq!(pn, rat(0, 1));
    }

    #[test]
    fn p_yes_is_monotone_and_converges() {
        let c = chain(&[
            &[(0, 1, 2), (1, 1, 2)],
            &[(0, 1, 4), (1, 1, 4), (2, 1, 2)],
            &[(2, 1, 1)],
        ]);
        let mu = StateDist::dirac(3, 0);
        let mut prev = rat(0, 1);
        for n in 0..30 {
            let (py, _) = c.p_yes_no(&mu, &[2], n).unwrap();
            assert!(py >= prev);
            prev = py;
        }
        let exact = c.reach_prob_exact(&[2]).unwrap()[0].clone();
        assert!(&exact - &prev < rat(1, 1000));
    }

    #[test]
    fn approx_reach_brackets_exact() {
        let c = chain(&[
            &[(0, 1, 2), (1, 1, 2)],
            &[(0, 1, 4), (2, 3, 4)],
            &[(2, 1, 1)],
        ]);
        let mu = StateDist::dirac(3, 0);
        let iv = c.approx_reach(&mu, &[2], &rat(1, 10_000), 1_000_000).unwrap();
        assert!(iv.converged);
        let exact = c.reach_prob_exact(&[2]).unwrap()[0].clone();
        assert!(iv.contains(&exact));
        assert!(iv.width() <= rat(1, 10_000));
    }

    #[test]
    fn degenerate_b() {
        let c = chain(&[&[(1, 1, 1)], &[(0, 1, 1)]]);
        // Empty B: p_yes ≡ 0, avoid-set is everything, converges at n = 0.
        let iv = c
            .approx_reach(&StateDist::dirac(2, 0), &[], &rat(1, 1000), 10)
            .unwrap();
        assert!(iv.converged);
        assert_eq!(iv.steps_used, 0);
        assert_eq!(iv.lo, rat(0, 1));
        assert_eq!(iv.hi, rat(0, 1));
        // B with μ(B) = 1 converges at n = 0 with [1, 1].
        let iv = c
            .approx_reach(&StateDist::dirac(2, 0), &[0], &rat(1, 1000), 10)
            .unwrap();
        assert_eq!((iv.lo, iv.hi), (rat(1, 1), rat(1, 1)));
        assert_eq!(iv.steps_used, 0);
    }

    #[test]
    fn text_round_trip() {
        let c = chain(&[&[(0, 1, 2), (1, 1, 2)], &[(0, 1, 3), (1, 2, 3)]]);
        let text = c.to_text();
        let back = FiniteSts::from_text(&text).unwrap();
        assert_eq!(c, back);
        let manual = FiniteSts::from_text("1/2 1/2\n1/3 2/3\n").unwrap();
        assert_eq!(c, manual);
    }

    #[test]
    fn bad_matrices_are_rejected() {
        assert!(FiniteSts::from_text("1/2 1/3\n0 1\n").is_err());
        assert!(FiniteSts::from_text("1/2\n0 1\n").is_err());
    }

    #[test]
    fn value_iteration_close_to_exact() {
        let c = chain(&[
            &[(0, 3, 10), (1, 7, 10)],
            &[(0, 1, 2), (2, 1, 2)],
            &[(2, 1, 1)],
        ]);
        let exact = c.reach_prob_exact(&[2]).unwrap();
        let vi = c.value_iteration(&[2], 1e-12, 100_000);
        for s in 0..3 {
            assert!((rational_to_f64(&exact[s]) - vi[s]).abs() < 1e-9);
        }
    }
}
