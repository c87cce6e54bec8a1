//! Test support: independent oracles and seeded random generators.
//!
//! Everything here exists to check the main code paths from a different
//! direction, so nothing in this module may call into the quantifier
//! elimination or exact-solver routines it is used to test.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::finite::FiniteSts;
use crate::formula::{Formula, Rel, Term};
use crate::Rational;

/// Small exact rational used by the oracle; inputs are kept tiny so i128
/// arithmetic cannot overflow (debug assertions would catch it anyway).
type Q = Ratio<i128>;

fn to_q(r: &Rational) -> Q {
    let n: i128 = r.numer().try_into().expect("oracle inputs stay small");
    let d: i128 = r.denom().try_into().expect("oracle inputs stay small");
    Ratio::new(n, d)
}

/// Compiled formula mirror with interned variables, for fast repeated
/// evaluation.
enum CF {
    True,
    False,
    Atom {
        rel: Rel,
        coefs: Vec<(usize, Q)>,
        konst: Q,
    },
    And(Vec<CF>),
    Or(Vec<CF>),
    Not(Box<CF>),
    Quant {
        forall: bool,
        var: usize,
        body: Box<CF>,
    },
}

fn intern(names: &mut BTreeMap<String, usize>, name: &str) -> usize {
    if let Some(&i) = names.get(name) {
        return i;
    }
    let i = names.len();
    names.insert(name.to_string(), i);
    i
}

fn compile(f: &Formula, names: &mut BTreeMap<String, usize>) -> CF {
    match f {
        Formula::True => CF::True,
        Formula::False => CF::False,
        Formula::Atom(a) => CF::Atom {
            rel: a.rel,
            coefs: a
                .term
                .coeffs()
                .map(|(v, c)| (intern(names, v), to_q(c)))
                .collect(),
            konst: to_q(a.term.constant_part()),
        },
        Formula::And(cs) => CF::And(cs.iter().map(|c| compile(c, names)).collect()),
        Formula::Or(cs) => CF::Or(cs.iter().map(|c| compile(c, names)).collect()),
        Formula::Not(c) => CF::Not(Box::new(compile(c, names))),
        Formula::Exists(v, b) => {
            let var = intern(names, v);
            CF::Quant {
                forall: false,
                var,
                body: Box::new(compile(b, names)),
            }
        }
        Formula::Forall(v, b) => {
            let var = intern(names, v);
            CF::Quant {
                forall: true,
                var,
                body: Box::new(compile(b, names)),
            }
        }
    }
}

/// Brute-force decision of a linear formula at an exact valuation of its
/// free variables, independent of quantifier elimination.
///
/// Quantifiers are decided by searching a finite candidate set: the truth of
/// the remaining formula, as a function of the quantified variable, only
/// changes at solutions of square subsystems of the atom set. Candidates are
/// those critical values plus midpoints between them and points beyond both
/// ends.
pub fn decide_by_lattice(f: &Formula, valuation: &BTreeMap<String, Rational>) -> bool {
    let mut names = BTreeMap::new();
    let root = compile(f, &mut names);
    let mut env: Vec<Option<Q>> = vec![None; names.len()];
    for (name, value) in valuation {
        if let Some(&i) = names.get(name) {
            env[i] = Some(to_q(value));
        }
    }
    eval_cf(&root, &mut env)
}

fn eval_cf(f: &CF, env: &mut Vec<Option<Q>>) -> bool {
    match f {
        CF::True => true,
        CF::False => false,
        CF::Atom { rel, coefs, konst } => {
            let mut acc = *konst;
            for (v, c) in coefs {
                acc += *c * env[*v].expect("free variable bound by valuation or quantifier");
            }
            match rel {
                Rel::Lt => acc < Q::zero(),
                Rel::Le => acc <= Q::zero(),
                Rel::Eq => acc.is_zero(),
            }
        }
        CF::And(cs) => cs.iter().all(|c| eval_cf(c, env)),
        CF::Or(cs) => cs.iter().any(|c| eval_cf(c, env)),
        CF::Not(c) => !eval_cf(c, env),
        CF::Quant { forall, var, body } => {
            let cands = candidates(body, *var, env);
            let saved = env[*var];
            let mut result = *forall;
            for cand in cands {
                env[*var] = Some(cand);
                let v = eval_cf(body, env);
                if v != *forall {
                    result = v;
                    break;
                }
            }
            env[*var] = saved;
            result
        }
    }
}

/// Collects the atoms under `f` as coefficient rows over unassigned
/// variables, with assigned variables folded into the constant.
fn collect_rows(f: &CF, env: &[Option<Q>], out: &mut Vec<(Vec<(usize, Q)>, Q)>) {
    match f {
        CF::True | CF::False => {}
        CF::Atom { coefs, konst, .. } => {
            let mut row = Vec::new();
            let mut k = *konst;
            for (v, c) in coefs {
                match env[*v] {
                    Some(q) => k += *c * q,
                    None => row.push((*v, *c)),
                }
            }
            if !row.is_empty() {
                out.push((row, k));
            }
        }
        CF::And(cs) | CF::Or(cs) => {
            for c in cs {
                collect_rows(c, env, out);
            }
        }
        CF::Not(c) => collect_rows(c, env, out),
        CF::Quant { body, .. } => collect_rows(body, env, out),
    }
}

/// Candidate values for quantified variable `var`: for every subset of at
/// most three atoms whose unassigned variables form a square solvable system
/// containing `var`, the `var` component of the solution is a critical
/// value. Midpoints and outer points then sample every cell between
/// criticals.
fn candidates(body: &CF, var: usize, env: &[Option<Q>]) -> Vec<Q> {
    let mut rows = Vec::new();
    collect_rows(body, env, &mut rows);
    let mut crit: Vec<Q> = Vec::new();
    let n = rows.len();
    {
        let mut consider = |idx: &[usize]| {
            if let Some(v) = solve_subsystem(&rows, idx, var) {
                crit.push(v);
            }
        };
        for i in 0..n {
            consider(&[i]);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                consider(&[i, j]);
            }
        }
        // Triples only matter with at least three unassigned variables.
        let unassigned = rows
            .iter()
            .flat_map(|(row, _)| row.iter().map(|(v, _)| *v))
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        if unassigned >= 3 {
            for i in 0..n {
                for j in (i + 1)..n {
                    for k in (j + 1)..n {
                        consider(&[i, j, k]);
                    }
                }
            }
        }
    }
    crit.sort();
    crit.dedup();
    if crit.is_empty() {
        return vec![Q::zero()];
    }
    let mut out = Vec::with_capacity(crit.len() * 2 + 1);
    out.push(crit[0] - Q::one());
    for (i, c) in crit.iter().enumerate() {
        out.push(*c);
        if i + 1 < crit.len() {
            out.push((*c + crit[i + 1]) / Q::from_integer(2));
        }
    }
    out.push(crit[crit.len() - 1] + Q::one());
    out
}

/// Solves the selected atoms as equalities over their unassigned variables;
/// returns the value of `var` when the system is square with a unique
/// solution.
fn solve_subsystem(rows: &[(Vec<(usize, Q)>, Q)], idx: &[usize], var: usize) -> Option<Q> {
    let mut vars: Vec<usize> = Vec::new();
    for &i in idx {
        for (v, _) in &rows[i].0 {
            if !vars.contains(v) {
                vars.push(*v);
            }
        }
    }
    if vars.len() != idx.len() || !vars.contains(&var) {
        return None;
    }
    vars.sort_unstable();
    let k = vars.len();
    // Dense augmented matrix [A | -konst].
    let mut m = vec![vec![Q::zero(); k + 1]; k];
    for (r, &i) in idx.iter().enumerate() {
        for (v, c) in &rows[i].0 {
            let col = vars.iter().position(|x| x == v).unwrap();
            m[r][col] += *c;
        }
        m[r][k] = -rows[i].1;
    }
    for col in 0..k {
        let pivot = (col..k).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        let p = m[col][col];
        for j in col..=k {
            m[col][j] /= p;
        }
        for r in 0..k {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col];
                for j in col..=k {
                    let sub = f * m[col][j];
                    m[r][j] -= sub;
                }
            }
        }
    }
    let pos = vars.iter().position(|&v| v == var).unwrap();
    Some(m[pos][k])
}

// ---------------------------------------------------------------------------
// Random generators (seeded, for the differential and criterion suites).
// ---------------------------------------------------------------------------

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_rational(rng: &mut StdRng, max_num: i64, max_den: i64) -> Rational {
    let n = rng.gen_range(-max_num..=max_num);
    let d = rng.gen_range(1..=max_den);
    crate::rat(n, d)
}

/// Configuration for random linear formulas.
pub struct FormulaGenConfig {
    pub free_vars: Vec<String>,
    pub max_quantifiers: usize,
    pub max_depth: usize,
}

impl Default for FormulaGenConfig {
    fn default() -> Self {
        FormulaGenConfig {
            free_vars: vec!["x".into(), "y".into(), "z".into()],
            max_quantifiers: 3,
            max_depth: 3,
        }
    }
}

/// A random formula of the linear fragment with at most
/// `cfg.max_quantifiers` quantifiers, each binding a fresh variable that is
/// in scope only inside its own subtree.
pub fn random_formula(rng: &mut StdRng, cfg: &FormulaGenConfig) -> Formula {
    let mut quant_budget = cfg.max_quantifiers;
    let mut next_q = 0usize;
    gen_node(rng, &cfg.free_vars, cfg.max_depth, &mut quant_budget, &mut next_q)
}

fn gen_node(
    rng: &mut StdRng,
    scope: &[String],
    depth: usize,
    quant_budget: &mut usize,
    next_q: &mut usize,
) -> Formula {
    let roll: f64 = rng.gen();
    if depth == 0 || roll < 0.4 {
        return gen_atom(rng, scope);
    }
    if *quant_budget > 0 && roll < 0.6 {
        *quant_budget -= 1;
        let var = format!("q{}", *next_q);
        *next_q += 1;
        let mut inner_scope = scope.to_vec();
        inner_scope.push(var.clone());
        let body = gen_node(rng, &inner_scope, depth - 1, quant_budget, next_q);
        // Make sure the bound variable occurs somewhere in the body.
        let body = if body.free_vars().contains(&var) {
            body
        } else {
            let t = Term::var(var.clone()).sub(&Term::constant(random_rational(rng, 3, 2)));
            Formula::and(vec![body, Formula::atom(t, Rel::Le)])
        };
        return if rng.gen_bool(0.5) {
            Formula::exists(var, body)
        } else {
            Formula::forall(var, body)
        };
    }
    let a = gen_node(rng, scope, depth - 1, quant_budget, next_q);
    let b = gen_node(rng, scope, depth - 1, quant_budget, next_q);
    match rng.gen_range(0..5u8) {
        0 | 1 => Formula::and(vec![a, b]),
        2 | 3 => Formula::or(vec![a, b]),
        _ => Formula::or(vec![Formula::not(a), b]),
    }
}

fn gen_atom(rng: &mut StdRng, scope: &[String]) -> Formula {
    let mut t = Term::constant(random_rational(rng, 4, 2));
    let n_vars = rng.gen_range(1..=2.min(scope.len()));
    for _ in 0..n_vars {
        let v = &scope[rng.gen_range(0..scope.len())];
        let c = loop {
            let c = random_rational(rng, 3, 2);
            if !c.is_zero() {
                break c;
            }
        };
        t = t.add(&Term::var(v.clone()).scale(&c));
    }
    let rel = match rng.gen_range(0..4u8) {
        0 => Rel::Lt,
        1 => Rel::Le,
        2 => Rel::Eq,
        _ => Rel::Lt,
    };
    Formula::atom(t, rel)
}

pub fn random_valuation(rng: &mut StdRng, vars: &[String]) -> BTreeMap<String, Rational> {
    vars.iter()
        .map(|v| (v.clone(), random_rational(rng, 8, 4)))
        .collect()
}

/// Random row-stochastic kernel with dyadic entries (denominator 64), so
/// repeated exact transforms stay cheap.
pub fn random_chain(rng: &mut StdRng, n: usize) -> FiniteSts {
    let mut kernel = Vec::with_capacity(n);
    for _ in 0..n {
        let deg = rng.gen_range(1..=3.min(n));
        let mut targets: Vec<usize> = Vec::new();
        while targets.len() < deg {
            let t = rng.gen_range(0..n);
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        // Split 64 into `deg` positive integer parts.
        let mut cuts: Vec<u32> = Vec::new();
        while cuts.len() < deg - 1 {
            let c = rng.gen_range(1..64u32);
            if !cuts.contains(&c) {
                cuts.push(c);
            }
        }
        cuts.sort_unstable();
        let mut parts = Vec::with_capacity(deg);
        let mut prev = 0u32;
        for &c in &cuts {
            parts.push(c - prev);
            prev = c;
        }
        parts.push(64 - prev);
        let mut row = vec![Rational::zero(); n];
        for (t, w) in targets.iter().zip(parts) {
            row[*t] = crate::rat(w as i64, 64);
        }
        kernel.push(row);
    }
    FiniteSts::new(kernel, None).expect("rows sum to one by construction")
}

/// A random subset of `0..n`, each element included with probability `p`.
pub fn random_subset(rng: &mut StdRng, n: usize, p: f64) -> Vec<usize> {
    (0..n).filter(|_| rng.gen_bool(p)).collect()
}

/// Closed-form ruin probability for the gambler's walk on `0..=n` absorbing
/// at both ends: probability of hitting 0 from state `k` with up-probability
/// `p`.
pub fn ruin_probability(p: &Rational, n: usize, k: usize) -> Rational {
    let q = Rational::one() - p;
    let r = q / p;
    if r == Rational::one() {
        return Rational::one() - crate::rat(k as i64, n as i64);
    }
    let pow = |e: usize| -> Rational {
        let mut acc = Rational::one();
        for _ in 0..e {
            acc *= &r;
        }
        acc
    };
    (pow(k) - pow(n)) / (Rational::one() - pow(n))
}
