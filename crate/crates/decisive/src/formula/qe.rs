use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};

use super::ast::{Atom, Formula, Rel};
use super::term::Term;
use super::FormulaError;
use crate::Rational;

/// Default cap on the number of atoms materialized during one elimination.
/// Fourier–Motzkin is worst-case exponential; the cap turns runaway inputs
/// into a structured error instead of an unbounded computation.
pub const DEFAULT_ATOM_CAP: usize = 100_000;

pub(crate) struct QeBudget {
    cap: usize,
    used: usize,
}

impl QeBudget {
    pub fn new(cap: usize) -> Self {
        QeBudget { cap, used: 0 }
    }

    fn charge(&mut self, n: usize) -> Result<(), FormulaError> {
        self.used = self.used.saturating_add(n);
        if self.used > self.cap {
            Err(FormulaError::ResourceExceeded {
                atoms: self.used,
                cap: self.cap,
            })
        } else {
            Ok(())
        }
    }
}

/// Eliminates all quantifiers, returning an equivalent quantifier-free
/// formula in canonical form. Total on the linear fragment; the only failure
/// mode is the atom-count cap.
pub fn eliminate_quantifiers(f: &Formula) -> Result<Formula, FormulaError> {
    eliminate_quantifiers_capped(f, DEFAULT_ATOM_CAP)
}

pub fn eliminate_quantifiers_capped(f: &Formula, cap: usize) -> Result<Formula, FormulaError> {
    let mut budget = QeBudget::new(cap);
    qe(&f.normalized(), &mut budget)
}

fn qe(f: &Formula, budget: &mut QeBudget) -> Result<Formula, FormulaError> {
    let out = match f {
        Formula::True | Formula::False | Formula::Atom(_) => f.clone(),
        Formula::And(cs) => Formula::and(
            cs.iter()
                .map(|c| qe(c, budget))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        Formula::Or(cs) => Formula::or(
            cs.iter()
                .map(|c| qe(c, budget))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        // Input is in negation normal form, but intermediate results of the
        // Forall case re-enter through `normalized`, so handle Not anyway.
        Formula::Not(c) => qe(&Formula::not(qe(c, budget)?).normalized(), budget)?,
        Formula::Exists(v, b) => {
            let body = qe(b, budget)?;
            exists_qf(v, &body, budget)?
        }
        Formula::Forall(v, b) => {
            let body = qe(b, budget)?;
            let negated = Formula::not(body).normalized();
            let ex = exists_qf(v, &negated, budget)?;
            Formula::not(ex).normalized()
        }
    };
    Ok(out.normalized())
}

/// Eliminates `∃v` from a quantifier-free formula: DNF conversion followed by
/// per-conjunct elimination (equality substitution first, then bound
/// combination).
fn exists_qf(v: &str, f: &Formula, budget: &mut QeBudget) -> Result<Formula, FormulaError> {
    if !f.free_vars().contains(v) {
        return Ok(f.clone());
    }
    let dnf = to_dnf(f, budget)?;
    let mut disjuncts = Vec::with_capacity(dnf.len());
    for conj in dnf {
        disjuncts.push(eliminate_from_conjunct(v, &conj, budget)?);
    }
    Ok(Formula::or(disjuncts))
}

/// A conjunct is a set of atoms; `None` marks a conjunct already known to be
/// contradictory.
type Conjunct = BTreeSet<Atom>;

fn to_dnf(f: &Formula, budget: &mut QeBudget) -> Result<Vec<Conjunct>, FormulaError> {
    let out = match f {
        Formula::True => vec![Conjunct::new()],
        Formula::False => vec![],
        Formula::Atom(a) => vec![[a.clone()].into_iter().collect()],
        Formula::Or(cs) => {
            let mut out = Vec::new();
            for c in cs {
                out.extend(to_dnf(c, budget)?);
            }
            dedup_conjuncts(out)
        }
        Formula::And(cs) => {
            let mut acc: Vec<Conjunct> = vec![Conjunct::new()];
            for c in cs {
                let rhs = to_dnf(c, budget)?;
                let mut next = Vec::new();
                for left in &acc {
                    for right in &rhs {
                        if let Some(merged) = merge_conjuncts(left, right) {
                            budget.charge(merged.len())?;
                            next.push(merged);
                        }
                    }
                }
                acc = dedup_conjuncts(next);
                if acc.is_empty() {
                    break;
                }
            }
            acc
        }
        Formula::Not(_) | Formula::Exists(..) | Formula::Forall(..) => {
            unreachable!("to_dnf expects a normalized quantifier-free formula")
        }
    };
    Ok(out)
}

fn dedup_conjuncts(mut cs: Vec<Conjunct>) -> Vec<Conjunct> {
    cs.sort();
    cs.dedup();
    cs
}

/// Unions two conjuncts, returning `None` when the result is cheaply
/// recognizable as unsatisfiable (exact complements, or contradictory
/// single-variable bounds). Keeps DNF sizes manageable on interval-shaped
/// inputs.
fn merge_conjuncts(a: &Conjunct, b: &Conjunct) -> Option<Conjunct> {
    let mut out = a.clone();
    for atom in b {
        if has_complement(&out, atom) {
            return None;
        }
        out.insert(atom.clone());
    }
    if cheap_infeasible(&out) {
        return None;
    }
    Some(out)
}

/// Detects empty conjuncts from single-variable atoms alone: collects the
/// tightest lower/upper bound per variable and reports crossings. Sound but
/// incomplete; full unsatisfiability falls out of elimination anyway.
fn cheap_infeasible(conj: &Conjunct) -> bool {
    use std::collections::BTreeMap;
    // (bound, strict): lower and upper per variable.
    let mut lo: BTreeMap<&str, (Rational, bool)> = BTreeMap::new();
    let mut hi: BTreeMap<&str, (Rational, bool)> = BTreeMap::new();
    for atom in conj {
        let mut vars = atom.term.coeffs();
        let (v, c) = match (vars.next(), vars.next()) {
            (Some((v, c)), None) => (v.as_str(), c.clone()),
            _ => continue,
        };
        let threshold = -(atom.term.constant_part() / &c);
        let (is_upper, strict) = match (atom.rel, c.is_positive()) {
            (Rel::Eq, _) => {
                tighten(&mut lo, v, threshold.clone(), false);
                tighten_hi(&mut hi, v, threshold, false);
                continue;
            }
            (Rel::Lt, true) => (true, true),
            (Rel::Le, true) => (true, false),
            (Rel::Lt, false) => (false, true),
            (Rel::Le, false) => (false, false),
        };
        if is_upper {
            tighten_hi(&mut hi, v, threshold, strict);
        } else {
            tighten(&mut lo, v, threshold, strict);
        }
    }
    for (v, (l, l_strict)) in &lo {
        if let Some((h, h_strict)) = hi.get(v) {
            if l > h || (l == h && (*l_strict || *h_strict)) {
                return true;
            }
        }
    }
    false
}

fn tighten<'a>(
    lo: &mut std::collections::BTreeMap<&'a str, (Rational, bool)>,
    v: &'a str,
    bound: Rational,
    strict: bool,
) {
    match lo.get(v) {
        Some((b, s)) if *b > bound || (*b == bound && (*s || !strict)) => {}
        _ => {
            lo.insert(v, (bound, strict));
        }
    }
}

fn tighten_hi<'a>(
    hi: &mut std::collections::BTreeMap<&'a str, (Rational, bool)>,
    v: &'a str,
    bound: Rational,
    strict: bool,
) {
    match hi.get(v) {
        Some((b, s)) if *b < bound || (*b == bound && (*s || !strict)) => {}
        _ => {
            hi.insert(v, (bound, strict));
        }
    }
}

fn has_complement(set: &Conjunct, atom: &Atom) -> bool {
    let complement = match atom.rel {
        Rel::Lt => Atom::new(atom.term.neg(), Rel::Le),
        Rel::Le => Atom::new(atom.term.neg(), Rel::Lt),
        Rel::Eq => return false,
    };
    match complement.normalized() {
        Formula::Atom(c) => set.contains(&c),
        _ => false,
    }
}

fn eliminate_from_conjunct(
    v: &str,
    atoms: &Conjunct,
    budget: &mut QeBudget,
) -> Result<Formula, FormulaError> {
    // Equalities first: substituting v's solution removes it outright.
    if let Some(eq) = atoms
        .iter()
        .find(|a| a.rel == Rel::Eq && a.term.mentions(v))
    {
        let sol = eq.term.solve_for(v).expect("mentions v");
        let mut bindings = BTreeMap::new();
        bindings.insert(v.to_string(), sol);
        let mut rest = Vec::new();
        for a in atoms {
            if a == eq {
                continue;
            }
            rest.push(Atom::new(a.term.substitute(&bindings), a.rel).normalized());
        }
        budget.charge(rest.len())?;
        return Ok(Formula::and(rest));
    }

    let mut lowers: Vec<(Term, Rel)> = Vec::new(); // bound ≤/< v
    let mut uppers: Vec<(Term, Rel)> = Vec::new(); // v ≤/< bound
    let mut others: Vec<Formula> = Vec::new();
    for a in atoms {
        let (c, rest) = a.term.split_var(v);
        if c.is_zero() {
            others.push(Formula::Atom(a.clone()));
            continue;
        }
        debug_assert!(a.rel != Rel::Eq, "equalities handled above");
        // c·v + rest REL 0  ⟺  v REL −rest/c (c > 0) or bound REL v (c < 0)
        let bound = rest.scale(&(-Rational::new(1.into(), 1.into()) / &c));
        if c.is_positive() {
            uppers.push((bound, a.rel));
        } else {
            lowers.push((bound, a.rel));
        }
    }
    // v is unbounded below or above: every combination of the remaining
    // constraints on v is satisfiable, so they vanish.
    if lowers.is_empty() || uppers.is_empty() {
        return Ok(Formula::and(others));
    }
    budget.charge(lowers.len() * uppers.len())?;
    for (lo, lo_rel) in &lowers {
        for (hi, hi_rel) in &uppers {
            let rel = if *lo_rel == Rel::Lt || *hi_rel == Rel::Lt {
                Rel::Lt
            } else {
                Rel::Le
            };
            others.push(Atom::new(lo.sub(hi), rel).normalized());
        }
    }
    Ok(Formula::and(others))
}

/// Semantic simplification of a quantifier-free formula: DNF with atoms
/// implied by the rest of their conjunct removed, and subsumed disjuncts
/// dropped. Equivalence-preserving; returns the input (normalized) when the
/// DNF would exceed the budget. Not part of QE itself — callers that build
/// long-lived formulas (abstraction blocks, splitter predicates) use it to
/// keep later eliminations small.
pub fn simplify_qf(f: &Formula) -> Result<Formula, FormulaError> {
    simplify_qf_capped(f, DEFAULT_ATOM_CAP)
}

pub fn simplify_qf_capped(f: &Formula, cap: usize) -> Result<Formula, FormulaError> {
    let n = f.normalized();
    if !n.is_quantifier_free() {
        return Ok(n);
    }
    let mut budget = QeBudget::new(cap);
    let dnf = match to_dnf(&n, &mut budget) {
        Ok(d) => d,
        Err(FormulaError::ResourceExceeded { .. }) => return Ok(n),
        Err(e) => return Err(e),
    };
    let mut conjs: Vec<Conjunct> = Vec::with_capacity(dnf.len());
    for c in dnf {
        let mut atoms: Vec<Atom> = c.into_iter().collect();
        let mut i = 0;
        while i < atoms.len() {
            let rest: Vec<Formula> = atoms
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, a)| Formula::Atom(a.clone()))
                .collect();
            let test = Formula::and(
                rest.into_iter()
                    .chain(std::iter::once(atoms[i].negated()))
                    .collect(),
            );
            if satisfiable(&test)? {
                i += 1;
            } else {
                atoms.remove(i);
            }
        }
        conjs.push(atoms.into_iter().collect());
    }
    conjs.sort();
    conjs.dedup();
    let mut keep: Vec<Conjunct> = Vec::new();
    'outer: for c in &conjs {
        for d in &conjs {
            if d != c && d.is_subset(c) {
                continue 'outer;
            }
        }
        keep.push(c.clone());
    }
    // Semantic absorption: a disjunct already covered by the others drops.
    let as_formula = |c: &Conjunct| -> Formula {
        Formula::and(c.iter().cloned().map(Formula::Atom).collect())
    };
    let mut i = 0;
    while i < keep.len() && keep.len() > 1 {
        let rest = Formula::or(
            keep.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, c)| as_formula(c))
                .collect(),
        );
        if entails(&as_formula(&keep[i]), &rest)? {
            keep.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(Formula::or(keep.iter().map(as_formula).collect()))
}

/// Decides a sentence by quantifier elimination. The result of QE on a
/// closed formula is always `True` or `False` because ground atoms fold
/// during normalization.
pub fn decide_sentence(f: &Formula) -> Result<bool, FormulaError> {
    decide_sentence_capped(f, DEFAULT_ATOM_CAP)
}

pub fn decide_sentence_capped(f: &Formula, cap: usize) -> Result<bool, FormulaError> {
    if let Some(v) = f.free_vars().into_iter().next() {
        return Err(FormulaError::FreeVariablePresent { name: v });
    }
    match eliminate_quantifiers_capped(f, cap)? {
        Formula::True => Ok(true),
        Formula::False => Ok(false),
        other => unreachable!("QE of a sentence left a non-constant formula: {other}"),
    }
}

/// Satisfiability over ℝ of a formula with free variables.
pub fn satisfiable(f: &Formula) -> Result<bool, FormulaError> {
    let mut wrapped = f.clone();
    for v in f.free_vars() {
        wrapped = Formula::exists(v, wrapped);
    }
    decide_sentence(&wrapped)
}

/// Semantic equivalence of two formulas over their free variables.
pub fn equivalent(a: &Formula, b: &Formula) -> Result<bool, FormulaError> {
    let left = Formula::and(vec![a.clone(), Formula::not(b.clone())]);
    if satisfiable(&left)? {
        return Ok(false);
    }
    let right = Formula::and(vec![b.clone(), Formula::not(a.clone())]);
    Ok(!satisfiable(&right)?)
}

/// Semantic entailment `a ⟹ b`.
pub fn entails(a: &Formula, b: &Formula) -> Result<bool, FormulaError> {
    let gap = Formula::and(vec![a.clone(), Formula::not(b.clone())]);
    Ok(!satisfiable(&gap)?)
}

/// Standard semantics of a quantifier-free formula at an exact valuation.
pub fn evaluate(
    f: &Formula,
    valuation: &BTreeMap<String, Rational>,
) -> Result<bool, FormulaError> {
    f.eval(valuation)
}
