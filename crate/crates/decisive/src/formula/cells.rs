use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

use super::ast::Formula;
use super::qe::eliminate_quantifiers;
use super::FormulaError;
use crate::Rational;

/// An open interval with endpoints in ℚ ∪ {−∞, +∞}; `None` is the infinite
/// endpoint on either side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenInterval {
    pub lo: Option<Rational>,
    pub hi: Option<Rational>,
}

impl OpenInterval {
    pub fn bounded(&self) -> bool {
        self.lo.is_some() && self.hi.is_some()
    }

    pub fn length(&self) -> Option<Rational> {
        match (&self.lo, &self.hi) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        }
    }

    pub fn contains(&self, q: &Rational) -> bool {
        self.lo.as_ref().map_or(true, |a| a < q) && self.hi.as_ref().map_or(true, |b| q < b)
    }

    /// A point strictly inside the interval.
    pub fn sample(&self) -> Rational {
        match (&self.lo, &self.hi) {
            (Some(a), Some(b)) => (a + b) / Rational::from_integer(2.into()),
            (Some(a), None) => a + Rational::one(),
            (None, Some(b)) => b - Rational::one(),
            (None, None) => Rational::zero(),
        }
    }
}

impl fmt::Display for OpenInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.lo {
            Some(a) => write!(f, "({a}, ")?,
            None => write!(f, "(-inf, ")?,
        }
        match &self.hi {
            Some(b) => write!(f, "{b})"),
            None => write!(f, "+inf)"),
        }
    }
}

/// A definable subset of ℝ in o-minimal normal form: finitely many points
/// and pairwise disjoint maximal open intervals. Half-open pieces appear as
/// a boundary point plus an open interval.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CellDecomposition1D {
    pub points: Vec<Rational>,
    pub intervals: Vec<OpenInterval>,
}

impl CellDecomposition1D {
    pub fn empty() -> Self {
        CellDecomposition1D::default()
    }

    pub fn full_line() -> Self {
        CellDecomposition1D {
            points: vec![],
            intervals: vec![OpenInterval { lo: None, hi: None }],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.intervals.is_empty()
    }

    /// True when the set is a finite set of points.
    pub fn is_finite(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn is_bounded(&self) -> bool {
        self.intervals.iter().all(|i| i.bounded())
    }

    /// Total length of the interval part; `None` when unbounded.
    pub fn total_length(&self) -> Option<Rational> {
        let mut acc = Rational::zero();
        for i in &self.intervals {
            acc += i.length()?;
        }
        Some(acc)
    }

    pub fn contains(&self, q: &Rational) -> bool {
        self.points.iter().any(|p| p == q) || self.intervals.iter().any(|i| i.contains(q))
    }

    /// Exact set union, re-canonicalized.
    pub fn union(&self, other: &CellDecomposition1D) -> CellDecomposition1D {
        let mut cuts: Vec<Rational> = Vec::new();
        for d in [self, other] {
            cuts.extend(d.points.iter().cloned());
            for i in &d.intervals {
                if let Some(a) = &i.lo {
                    cuts.push(a.clone());
                }
                if let Some(b) = &i.hi {
                    cuts.push(b.clone());
                }
            }
        }
        cuts.sort();
        cuts.dedup();
        let member = |q: &Rational| self.contains(q) || other.contains(q);
        assemble(&cuts, |q| member(q), |iv| member(&iv.sample()))
    }
}

impl fmt::Display for CellDecomposition1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "{{}}");
        }
        let mut first = true;
        for p in &self.points {
            if !first {
                write!(f, " u ")?;
            }
            first = false;
            write!(f, "{{{p}}}")?;
        }
        for i in &self.intervals {
            if !first {
                write!(f, " u ")?;
            }
            first = false;
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

/// Exact decomposition of `{v ∈ ℝ | f(v)}` for a formula with exactly one
/// free variable. Quantifiers are eliminated first; the thresholds of the
/// resulting atoms cut the line into candidate cells which are then tested
/// pointwise.
pub fn decompose_1d(f: &Formula, var: &str) -> Result<CellDecomposition1D, FormulaError> {
    let free = f.free_vars();
    if free.len() > 1 || (free.len() == 1 && !free.contains(var)) {
        return Err(FormulaError::WrongArity {
            expected: var.to_string(),
            found: free.into_iter().collect(),
        });
    }
    let qf = eliminate_quantifiers(f)?;
    decompose_1d_qf(&qf, var)
}

/// Same as [`decompose_1d`] for an already quantifier-free normalized
/// formula (skips the QE pass).
pub(crate) fn decompose_1d_qf(
    qf: &Formula,
    var: &str,
) -> Result<CellDecomposition1D, FormulaError> {
    match qf {
        Formula::True => return Ok(CellDecomposition1D::full_line()),
        Formula::False => return Ok(CellDecomposition1D::empty()),
        _ => {}
    }
    let mut thresholds = Vec::new();
    collect_thresholds(qf, var, &mut thresholds);
    thresholds.sort();
    thresholds.dedup();
    let eval_at = |q: &Rational| -> bool {
        let mut val = BTreeMap::new();
        val.insert(var.to_string(), q.clone());
        qf.eval(&val).expect("quantifier-free single-variable formula")
    };
    Ok(assemble(&thresholds, |q| eval_at(q), |iv| eval_at(&iv.sample())))
}

fn collect_thresholds(f: &Formula, var: &str, out: &mut Vec<Rational>) {
    match f {
        Formula::Atom(a) => {
            let (c, rest) = a.term.split_var(var);
            if !c.is_zero() {
                // a·v + r rel 0 has its root at v = −r/a.
                out.push(-(rest.constant_part() / &c));
            }
        }
        Formula::And(cs) | Formula::Or(cs) => {
            for c in cs {
                collect_thresholds(c, var, out);
            }
        }
        Formula::Not(c) => collect_thresholds(c, var, out),
        _ => {}
    }
}

/// Builds the canonical decomposition from sorted candidate cut points and
/// membership tests for points and for the open intervals between them.
fn assemble(
    cuts: &[Rational],
    point_member: impl Fn(&Rational) -> bool,
    interval_member: impl Fn(&OpenInterval) -> bool,
) -> CellDecomposition1D {
    if cuts.is_empty() {
        return if interval_member(&OpenInterval { lo: None, hi: None }) {
            CellDecomposition1D::full_line()
        } else {
            CellDecomposition1D::empty()
        };
    }
    let mut cells: Vec<(OpenInterval, bool)> = Vec::new();
    let mut point_flags: Vec<bool> = Vec::new();
    for (i, p) in cuts.iter().enumerate() {
        let lo = if i == 0 { None } else { Some(cuts[i - 1].clone()) };
        let iv = OpenInterval {
            lo,
            hi: Some(p.clone()),
        };
        let m = interval_member(&iv);
        cells.push((iv, m));
        point_flags.push(point_member(p));
    }
    let last = OpenInterval {
        lo: Some(cuts[cuts.len() - 1].clone()),
        hi: None,
    };
    let m = interval_member(&last);
    cells.push((last, m));

    // Merge: consecutive member intervals glue across a member point, which
    // then stops being an isolated point. Points adjacent to at most one
    // member interval stay points.
    let mut points = Vec::new();
    let mut intervals = Vec::new();
    let mut current: Option<OpenInterval> = None;
    for i in 0..cells.len() {
        let (iv, m) = &cells[i];
        if *m {
            match &mut current {
                Some(run) => run.hi = iv.hi.clone(),
                None => current = Some(iv.clone()),
            }
        } else if let Some(run) = current.take() {
            intervals.push(run);
        }
        if i < point_flags.len() {
            let glue = point_flags[i] && *m && cells[i + 1].1;
            if !glue {
                if let Some(run) = current.take() {
                    intervals.push(run);
                }
                if point_flags[i] {
                    points.push(cuts[i].clone());
                }
            }
            // When gluing, `current` stays open across the point.
        }
    }
    if let Some(run) = current.take() {
        intervals.push(run);
    }
    CellDecomposition1D { points, intervals }
}
