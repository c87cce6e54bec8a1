//! Recognition of box-shaped definable sets (products of bounded
//! intervals), used wherever a set must be sampled or integrated in closed
//! form: strong continuous resets and continuous initial supports.

use crate::formula::{decompose_1d, eliminate_quantifiers, Formula, FormulaError, Rel, Term};
use crate::shs::{primed, HybridSystem};
use crate::Rational;

/// Tries to read `f` as a full-dimensional bounded box. The formula may be
/// over the system variables or over their primed copies (for reset
/// relations); a formula mentioning both is state-dependent and never a
/// box. Returns per-dimension open bounds `(lo, hi)` with `lo < hi` —
/// boundary points are immaterial for sampling and volume.
pub fn extract_box(
    h: &HybridSystem,
    f: &Formula,
) -> Result<Option<Vec<(Rational, Rational)>>, FormulaError> {
    let free = f.free_vars();
    let primed_vars: Vec<String> = h.vars.iter().map(|v| primed(v)).collect();
    let dims: Vec<String> = if free.iter().any(|v| primed_vars.contains(v)) {
        if free.iter().any(|v| h.vars.contains(v)) {
            return Ok(None);
        }
        primed_vars
    } else {
        h.vars.clone()
    };
    if !free.iter().all(|v| dims.contains(v)) {
        return Ok(None);
    }

    let mut bounds = Vec::with_capacity(dims.len());
    for dim in &dims {
        let mut proj = f.clone();
        for other in &dims {
            if other != dim {
                proj = Formula::exists(other.clone(), proj);
            }
        }
        let proj = eliminate_quantifiers(&proj)?;
        let cells = decompose_1d(&proj, dim)?;
        if cells.intervals.len() != 1 {
            return Ok(None);
        }
        let iv = &cells.intervals[0];
        let (lo, hi) = match (&iv.lo, &iv.hi) {
            (Some(a), Some(b)) => (a.clone(), b.clone()),
            _ => return Ok(None),
        };
        // Stray points must be the interval's own endpoints.
        if !cells.points.iter().all(|p| *p == lo || *p == hi) {
            return Ok(None);
        }
        bounds.push((lo, hi));
    }

    // The set must actually be the product of its projections.
    let mut product = Vec::new();
    for (dim, (lo, hi)) in dims.iter().zip(&bounds) {
        product.push(Formula::cmp(
            Term::constant(lo.clone()),
            Rel::Lt,
            Term::var(dim.clone()),
        ));
        product.push(Formula::cmp(
            Term::var(dim.clone()),
            Rel::Lt,
            Term::constant(hi.clone()),
        ));
    }
    // Compare up to boundary: the open box must be inside f, and f inside
    // the closed box; measure-zero boundary differences are irrelevant.
    let open_box = Formula::and(product);
    let mut closed = Vec::new();
    for (dim, (lo, hi)) in dims.iter().zip(&bounds) {
        closed.push(Formula::cmp(
            Term::constant(lo.clone()),
            Rel::Le,
            Term::var(dim.clone()),
        ));
        closed.push(Formula::cmp(
            Term::var(dim.clone()),
            Rel::Le,
            Term::constant(hi.clone()),
        ));
    }
    let closed_box = Formula::and(closed);
    let inside = crate::formula::entails(&open_box, f)?;
    let outside = crate::formula::entails(f, &closed_box)?;
    if inside && outside {
        Ok(Some(bounds))
    } else {
        Ok(None)
    }
}

/// Volume of a box.
pub fn box_volume(bounds: &[(Rational, Rational)]) -> Rational {
    let mut acc = Rational::from_integer(1.into());
    for (lo, hi) in bounds {
        acc *= hi - lo;
    }
    acc
}
