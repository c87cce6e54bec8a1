use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::Rational;

/// A linear expression `c + Σ ci·xi` with exact rational coefficients.
///
/// Variables with zero coefficient are never stored, so structural equality
/// is semantic equality.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    coeffs: BTreeMap<String, Rational>,
    constant: Rational,
}

impl Term {
    pub fn zero() -> Self {
        Term {
            coeffs: BTreeMap::new(),
            constant: Rational::zero(),
        }
    }

    pub fn constant(c: Rational) -> Self {
        Term {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(name: impl Into<String>) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(name.into(), Rational::one());
        Term {
            coeffs,
            constant: Rational::zero(),
        }
    }

    pub fn from_parts(coeffs: BTreeMap<String, Rational>, constant: Rational) -> Self {
        let mut t = Term { coeffs, constant };
        t.coeffs.retain(|_, c| !c.is_zero());
        t
    }

    pub fn coeff(&self, name: &str) -> Rational {
        self.coeffs.get(name).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_part(&self) -> &Rational {
        &self.constant
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&String, &Rational)> {
        self.coeffs.iter()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.coeffs.keys().cloned().collect()
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.coeffs.contains_key(name)
    }

    pub fn add(&self, other: &Term) -> Term {
        let mut coeffs = self.coeffs.clone();
        for (v, c) in &other.coeffs {
            let entry = coeffs.entry(v.clone()).or_insert_with(Rational::zero);
            *entry += c;
        }
        coeffs.retain(|_, c| !c.is_zero());
        Term {
            coeffs,
            constant: &self.constant + &other.constant,
        }
    }

    pub fn sub(&self, other: &Term) -> Term {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn neg(&self) -> Term {
        self.scale(&-Rational::one())
    }

    pub fn scale(&self, factor: &Rational) -> Term {
        if factor.is_zero() {
            return Term::zero();
        }
        Term {
            coeffs: self
                .coeffs
                .iter()
                .map(|(v, c)| (v.clone(), c * factor))
                .collect(),
            constant: &self.constant * factor,
        }
    }

    /// Simultaneous substitution of variables by linear terms.
    pub fn substitute(&self, bindings: &BTreeMap<String, Term>) -> Term {
        let mut out = Term::constant(self.constant.clone());
        for (v, c) in &self.coeffs {
            match bindings.get(v) {
                Some(t) => out = out.add(&t.scale(c)),
                None => {
                    let entry = out.coeffs.entry(v.clone()).or_insert_with(Rational::zero);
                    *entry += c;
                }
            }
        }
        out.coeffs.retain(|_, c| !c.is_zero());
        out
    }

    /// Evaluates the term, requiring every variable to be bound.
    pub fn eval(&self, valuation: &BTreeMap<String, Rational>) -> Result<Rational, String> {
        let mut acc = self.constant.clone();
        for (v, c) in &self.coeffs {
            match valuation.get(v) {
                Some(q) => acc += c * q,
                None => return Err(v.clone()),
            }
        }
        Ok(acc)
    }

    /// For a term `a·v + r` with `a ≠ 0`, returns the solution of
    /// `a·v + r = 0` for `v`, i.e. the term `-r/a`.
    pub fn solve_for(&self, var: &str) -> Option<Term> {
        let a = self.coeffs.get(var)?;
        let mut rest = self.clone();
        rest.coeffs.remove(var);
        Some(rest.scale(&(-Rational::one() / a)))
    }

    /// Removes `var` from the term, returning its coefficient and the rest.
    pub fn split_var(&self, var: &str) -> (Rational, Term) {
        let mut rest = self.clone();
        let c = rest.coeffs.remove(var).unwrap_or_else(Rational::zero);
        (c, rest)
    }

    /// Scales the term so all coefficients are coprime integers. The scaling
    /// factor is always positive, so inequality direction is preserved.
    pub fn integer_normalized(&self) -> Term {
        use num_bigint::BigInt;
        use num_integer::Integer;
        let mut denom_lcm = BigInt::one();
        let mut visit = |q: &Rational| {
            denom_lcm = denom_lcm.lcm(q.denom());
        };
        visit(&self.constant);
        for c in self.coeffs.values() {
            visit(c);
        }
        let scaled = self.scale(&Rational::from_integer(denom_lcm));
        let mut num_gcd = BigInt::zero();
        num_gcd = num_gcd.gcd(&scaled.constant.numer().abs());
        for c in scaled.coeffs.values() {
            num_gcd = num_gcd.gcd(&c.numer().abs());
        }
        if num_gcd.is_zero() || num_gcd.is_one() {
            return scaled;
        }
        scaled.scale(&(Rational::one() / Rational::from_integer(num_gcd)))
    }

    /// Sign of the leading coefficient (first variable in name order), used
    /// to orient equalities deterministically.
    pub fn leading_sign(&self) -> i8 {
        match self.coeffs.values().next() {
            Some(c) if c.is_negative() => -1,
            Some(_) => 1,
            None => {
                if self.constant.is_negative() {
                    -1
                } else {
                    1
                }
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.coeffs {
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let a = c.abs();
            if a.is_one() {
                write!(f, "{v}")?;
            } else {
                write!(f, "{a}*{v}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)?;
        } else if !self.constant.is_zero() {
            if self.constant.is_negative() {
                write!(f, " - {}", self.constant.abs())?;
            } else {
                write!(f, " + {}", self.constant)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    #[test]
    fn zero_coefficients_are_dropped() {
        let t = Term::var("x").sub(&Term::var("x"));
        assert!(t.is_constant());
        assert_eq!(t, Term::zero());
    }

    #[test]
    fn substitution_is_simultaneous() {
        // x ↦ y, y ↦ x applied to x + 2y gives y + 2x, not 3x or 3y.
        let t = Term::var("x").add(&Term::var("y").scale(&rat(2, 1)));
        let mut b = BTreeMap::new();
        b.insert("x".to_string(), Term::var("y"));
        b.insert("y".to_string(), Term::var("x"));
        let s = t.substitute(&b);
        assert_eq!(s.coeff("x"), rat(2, 1));
        assert_eq!(s.coeff("y"), rat(1, 1));
    }

    #[test]
    fn integer_normalization_is_coprime_and_positive_scaled() {
        // (2/3)x - 4/3  →  x - 2 after clearing denominators and gcd.
        let t = Term::var("x")
            .scale(&rat(2, 3))
            .add(&Term::constant(rat(-4, 3)));
        let n = t.integer_normalized();
        assert_eq!(n.coeff("x"), rat(1, 1));
        assert_eq!(*n.constant_part(), rat(-2, 1));
    }

    #[test]
    fn solve_for_isolates_variable() {
        // 2x + y - 3 = 0  →  x = (3 - y)/2
        let t = Term::var("x")
            .scale(&rat(2, 1))
            .add(&Term::var("y"))
            .add(&Term::constant(rat(-3, 1)));
        let sol = t.solve_for("x").unwrap();
        assert_eq!(sol.coeff("y"), rat(-1, 2));
        assert_eq!(*sol.constant_part(), rat(3, 2));
    }
}
