use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{Signed, Zero};

use super::term::Term;
use crate::Rational;

/// Atom relation: the atom `Atom(t, rel)` states `t rel 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Lt,
    Le,
    Eq,
}

impl Rel {
    pub fn holds(&self, q: &Rational) -> bool {
        match self {
            Rel::Lt => q.is_negative(),
            Rel::Le => q.is_negative() || q.is_zero(),
            Rel::Eq => q.is_zero(),
        }
    }
}

/// A normalized linear atom `term rel 0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub term: Term,
    pub rel: Rel,
}

impl Atom {
    pub fn new(term: Term, rel: Rel) -> Self {
        Atom { term, rel }
    }

    /// Canonical form: constant atoms fold to `True`/`False`; otherwise the
    /// term is scaled to coprime integer coefficients, and equalities are
    /// oriented so the leading coefficient is positive.
    pub fn normalized(&self) -> Formula {
        if self.term.is_constant() {
            return if self.rel.holds(self.term.constant_part()) {
                Formula::True
            } else {
                Formula::False
            };
        }
        let mut t = self.term.integer_normalized();
        if self.rel == Rel::Eq && t.leading_sign() < 0 {
            t = t.neg();
        }
        Formula::Atom(Atom::new(t, self.rel))
    }

    /// The negation, as a formula (`¬(t = 0)` splits into two strict atoms).
    pub fn negated(&self) -> Formula {
        match self.rel {
            Rel::Lt => Atom::new(self.term.neg(), Rel::Le).normalized(),
            Rel::Le => Atom::new(self.term.neg(), Rel::Lt).normalized(),
            Rel::Eq => Formula::or(vec![
                Atom::new(self.term.clone(), Rel::Lt).normalized(),
                Atom::new(self.term.neg(), Rel::Lt).normalized(),
            ]),
        }
    }

    pub fn eval(&self, valuation: &BTreeMap<String, Rational>) -> Result<bool, String> {
        Ok(self.rel.holds(&self.term.eval(valuation)?))
    }
}

/// First-order formula over linear real arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
}

impl Formula {
    pub fn atom(term: Term, rel: Rel) -> Formula {
        Formula::Atom(Atom::new(term, rel))
    }

    /// `lhs rel rhs` as an atom over `lhs - rhs`.
    pub fn cmp(lhs: Term, rel: Rel, rhs: Term) -> Formula {
        Formula::atom(lhs.sub(&rhs), rel)
    }

    pub fn and(children: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for c in children {
            match c {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(cs) => out.extend(cs),
                other => out.push(other),
            }
        }
        out.sort();
        out.dedup();
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    pub fn or(children: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for c in children {
            match c {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(cs) => out.extend(cs),
                other => out.push(other),
            }
        }
        out.sort();
        out.dedup();
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn exists(var: impl Into<String>, body: Formula) -> Formula {
        Formula::Exists(var.into(), Box::new(body))
    }

    pub fn forall(var: impl Into<String>, body: Formula) -> Formula {
        Formula::Forall(var.into(), Box::new(body))
    }

    pub fn implies(lhs: Formula, rhs: Formula) -> Formula {
        Formula::or(vec![Formula::not(lhs), rhs])
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::And(cs) | Formula::Or(cs) => cs.iter().all(|c| c.is_quantifier_free()),
            Formula::Not(c) => c.is_quantifier_free(),
            Formula::Exists(..) | Formula::Forall(..) => false,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => {
                for v in a.term.vars() {
                    if !bound.iter().any(|b| b == &v) {
                        out.insert(v);
                    }
                }
            }
            Formula::And(cs) | Formula::Or(cs) => {
                for c in cs {
                    c.collect_free(bound, out);
                }
            }
            Formula::Not(c) => c.collect_free(bound, out),
            Formula::Exists(v, b) | Formula::Forall(v, b) => {
                bound.push(v.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    /// All variable names occurring anywhere (free or bound); used to pick
    /// fresh names.
    pub fn all_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_all(&mut out);
        out
    }

    fn collect_all(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => out.extend(a.term.vars()),
            Formula::And(cs) | Formula::Or(cs) => {
                for c in cs {
                    c.collect_all(out);
                }
            }
            Formula::Not(c) => c.collect_all(out),
            Formula::Exists(v, b) | Formula::Forall(v, b) => {
                out.insert(v.clone());
                b.collect_all(out);
            }
        }
    }

    /// Capture-avoiding simultaneous substitution of free variables by
    /// linear terms.
    pub fn substitute(&self, bindings: &BTreeMap<String, Term>) -> Formula {
        if bindings.is_empty() {
            return self.clone();
        }
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Atom(a) => Formula::Atom(Atom::new(a.term.substitute(bindings), a.rel)),
            Formula::And(cs) => Formula::And(cs.iter().map(|c| c.substitute(bindings)).collect()),
            Formula::Or(cs) => Formula::Or(cs.iter().map(|c| c.substitute(bindings)).collect()),
            Formula::Not(c) => Formula::not(c.substitute(bindings)),
            Formula::Exists(v, b) => {
                let (v, b, inner) = rebind(v, b, bindings);
                Formula::Exists(v, Box::new(b.substitute(&inner)))
            }
            Formula::Forall(v, b) => {
                let (v, b, inner) = rebind(v, b, bindings);
                Formula::Forall(v, Box::new(b.substitute(&inner)))
            }
        }
    }

    /// Negation normal form with canonical atoms: `Not` is eliminated,
    /// `And`/`Or` are flattened, sorted and deduplicated, constants fold,
    /// and quantifiers over unused variables are dropped.
    pub fn normalized(&self) -> Formula {
        norm(self, false)
    }

    /// Standard semantics with exact arithmetic on a quantifier-free formula.
    pub fn eval(&self, valuation: &BTreeMap<String, Rational>) -> Result<bool, super::FormulaError> {
        match self {
            Formula::True => Ok(true),
            Formula::False => Ok(false),
            Formula::Atom(a) => a
                .eval(valuation)
                .map_err(|name| super::FormulaError::MissingVariable { name }),
            Formula::And(cs) => {
                for c in cs {
                    if !c.eval(valuation)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Or(cs) => {
                for c in cs {
                    if c.eval(valuation)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Not(c) => Ok(!c.eval(valuation)?),
            Formula::Exists(..) | Formula::Forall(..) => {
                Err(super::FormulaError::QuantifierPresent)
            }
        }
    }
}

/// Handles quantifier scope during substitution: drops the bound variable
/// from the bindings and renames it when it would capture a substituted term.
fn rebind(
    var: &str,
    body: &Formula,
    bindings: &BTreeMap<String, Term>,
) -> (String, Formula, BTreeMap<String, Term>) {
    let mut inner: BTreeMap<String, Term> = bindings
        .iter()
        .filter(|(k, _)| k.as_str() != var)
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let body_free = body.free_vars();
    inner.retain(|k, _| body_free.contains(k));
    let captured = inner.values().any(|t| t.mentions(var));
    if !captured {
        return (var.to_string(), body.clone(), inner);
    }
    let mut taken: BTreeSet<String> = body.all_vars();
    for t in inner.values() {
        taken.extend(t.vars());
    }
    let fresh = fresh_name(var, &taken);
    let mut rename = BTreeMap::new();
    rename.insert(var.to_string(), Term::var(fresh.clone()));
    let body = body.substitute(&rename);
    (fresh, body, inner)
}

pub(crate) fn fresh_name(base: &str, taken: &BTreeSet<String>) -> String {
    let mut i = 0usize;
    loop {
        let cand = format!("{base}__{i}");
        if !taken.contains(&cand) {
            return cand;
        }
        i += 1;
    }
}

fn norm(f: &Formula, negate: bool) -> Formula {
    match f {
        Formula::True => {
            if negate {
                Formula::False
            } else {
                Formula::True
            }
        }
        Formula::False => {
            if negate {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::Atom(a) => {
            if negate {
                a.negated()
            } else {
                a.normalized()
            }
        }
        Formula::And(cs) => {
            let children: Vec<Formula> = cs.iter().map(|c| norm(c, negate)).collect();
            if negate {
                Formula::or(children)
            } else {
                Formula::and(children)
            }
        }
        Formula::Or(cs) => {
            let children: Vec<Formula> = cs.iter().map(|c| norm(c, negate)).collect();
            if negate {
                Formula::and(children)
            } else {
                Formula::or(children)
            }
        }
        Formula::Not(c) => norm(c, !negate),
        Formula::Exists(v, b) => {
            let body = norm(b, negate);
            quantify(!negate, v, body)
        }
        Formula::Forall(v, b) => {
            let body = norm(b, negate);
            quantify(negate, v, body)
        }
    }
}

/// Builds `∃v.body` (`existential = true`) or `∀v.body`, dropping the
/// quantifier when the variable does not occur or the body is constant.
fn quantify(existential: bool, var: &str, body: Formula) -> Formula {
    match body {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        b if !b.free_vars().contains(var) => b,
        b if existential => Formula::Exists(var.to_string(), Box::new(b)),
        b => Formula::Forall(var.to_string(), Box::new(b)),
    }
}

// Display uses the input grammar so printed formulas re-parse to the same
// tree (after normalization).

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rel::Lt => write!(f, "<"),
            Rel::Le => write!(f, "<="),
            Rel::Eq => write!(f, "="),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Negative-leading inequalities read better flipped: -x <= 0
        // prints as x >= 0. Both forms re-parse to the same atom.
        let flip = self.rel != Rel::Eq && self.term.leading_sign() < 0;
        let term = if flip { self.term.neg() } else { self.term.clone() };
        let rel = match (self.rel, flip) {
            (Rel::Lt, true) => ">",
            (Rel::Le, true) => ">=",
            (Rel::Lt, false) => "<",
            (Rel::Le, false) => "<=",
            (Rel::Eq, _) => "=",
        };
        let constant = term.constant_part().clone();
        let vars_part = term.sub(&Term::constant(constant.clone()));
        if vars_part.is_constant() {
            write!(f, "{} {} 0", term, rel)
        } else {
            write!(f, "{} {} {}", vars_part, rel, -constant)
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::And(cs) => {
                let mut first = true;
                for c in cs {
                    if !first {
                        write!(f, " & ")?;
                    }
                    first = false;
                    if matches!(c, Formula::Or(_)) {
                        write!(f, "({c})")?;
                    } else {
                        write!(f, "{c}")?;
                    }
                }
                Ok(())
            }
            Formula::Or(cs) => {
                let mut first = true;
                for c in cs {
                    if !first {
                        write!(f, " | ")?;
                    }
                    first = false;
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            Formula::Not(c) => write!(f, "!({c})"),
            Formula::Exists(v, b) => write!(f, "E {v} ({b})"),
            Formula::Forall(v, b) => write!(f, "A {v} ({b})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    fn x() -> Term {
        Term::var("x")
    }

    #[test]
    fn normalization_flattens_and_folds() {
        let f = Formula::and(vec![
            Formula::True,
            Formula::and(vec![Formula::atom(x(), Rel::Lt), Formula::True]),
        ]);
        assert_eq!(f, Formula::atom(x(), Rel::Lt));
    }

    #[test]
    fn negation_normal_form_eliminates_not() {
        let f = Formula::not(Formula::and(vec![
            Formula::atom(x(), Rel::Lt),
            Formula::atom(x(), Rel::Eq),
        ]));
        let n = f.normalized();
        fn has_not(f: &Formula) -> bool {
            match f {
                Formula::Not(_) => true,
                Formula::And(cs) | Formula::Or(cs) => cs.iter().any(has_not),
                Formula::Exists(_, b) | Formula::Forall(_, b) => has_not(b),
                _ => false,
            }
        }
        assert!(!has_not(&n));
        // ¬(x<0 ∧ x=0) ≡ x≥0 ∨ x≠0 — check semantics at a few points.
        for v in [-1i64, 0, 1] {
            let mut val = BTreeMap::new();
            val.insert("x".to_string(), rat(v, 1));
            assert_eq!(n.eval(&val).unwrap(), !(v < 0 && v == 0));
        }
    }

    #[test]
    fn normalization_is_idempotent() {
        let f = Formula::or(vec![
            Formula::not(Formula::atom(x(), Rel::Le)),
            Formula::and(vec![
                Formula::atom(x().scale(&rat(2, 4)), Rel::Lt),
                Formula::atom(x(), Rel::Lt),
            ]),
            Formula::exists("y", Formula::atom(x(), Rel::Eq)),
        ]);
        let once = f.normalized();
        assert_eq!(once, once.normalized());
    }

    #[test]
    fn capture_avoiding_substitution_renames() {
        // (∃y. x < y)[x ↦ y] must not capture: result ≡ ∃y'. y < y'.
        let f = Formula::exists("y", Formula::cmp(x(), Rel::Lt, Term::var("y")));
        let mut b = BTreeMap::new();
        b.insert("x".to_string(), Term::var("y"));
        let s = f.substitute(&b);
        assert_eq!(
            s.free_vars().into_iter().collect::<Vec<_>>(),
            vec!["y".to_string()]
        );
        match s {
            Formula::Exists(v, _) => assert_ne!(v, "y"),
            other => panic!("expected Exists, got {other:?}"),
        }
    }

    #[test]
    fn display_round_trip_shape() {
        let f = Formula::and(vec![
            Formula::cmp(
                x().add(&Term::var("y").scale(&rat(2, 1))),
                Rel::Le,
                Term::constant(rat(3, 1)),
            ),
            Formula::or(vec![
                Formula::atom(x(), Rel::Lt),
                Formula::cmp(Term::var("y"), Rel::Eq, Term::constant(rat(2, 1))),
            ]),
        ]);
        let printed = format!("{f}");
        assert!(printed.contains("x + 2*y <= 3"));
    }
}
