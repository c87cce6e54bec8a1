use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use super::FiniteError;
use crate::Rational;

/// Solves `A x = b` exactly by fraction-free (Bareiss) elimination.
///
/// Rows are first scaled to integers; the elimination then stays in `BigInt`
/// with exact divisions, and back-substitution returns rationals.
pub fn solve_exact(a: &[Vec<Rational>], b: &[Rational]) -> Result<Vec<Rational>, FiniteError> {
    let n = a.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    // Integer-scaled augmented matrix.
    let mut m: Vec<Vec<BigInt>> = Vec::with_capacity(n);
    for (row, rhs) in a.iter().zip(b) {
        debug_assert_eq!(row.len(), n);
        let mut lcm = BigInt::one();
        for q in row.iter().chain(std::iter::once(rhs)) {
            lcm = lcm.lcm(q.denom());
        }
        let scale = Rational::from_integer(lcm);
        let mut irow: Vec<BigInt> = row.iter().map(|q| (q * &scale).to_integer()).collect();
        irow.push((rhs * &scale).to_integer());
        m.push(irow);
    }

    let mut prev = BigInt::one();
    for k in 0..n {
        let pivot = (k..n)
            .find(|&r| !m[r][k].is_zero())
            .ok_or(FiniteError::SingularSystem)?;
        if pivot != k {
            m.swap(k, pivot);
        }
        for i in (k + 1)..n {
            for j in (k + 1)..=n {
                let num = &m[k][k] * &m[i][j] - &m[i][k] * &m[k][j];
                // Exact division is the Bareiss invariant.
                m[i][j] = num / &prev;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
        if prev.is_zero() {
            return Err(FiniteError::SingularSystem);
        }
    }

    let mut x = vec![Rational::zero(); n];
    for i in (0..n).rev() {
        let mut acc = Rational::from_integer(m[i][n].clone());
        for j in (i + 1)..n {
            acc -= Rational::from_integer(m[i][j].clone()) * &x[j];
        }
        if m[i][i].is_zero() {
            return Err(FiniteError::SingularSystem);
        }
        x[i] = acc / Rational::from_integer(m[i][i].clone());
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    #[test]
    fn solves_small_system() {
        // 2x + y = 5, x - y = 1  →  x = 2, y = 1
        let a = vec![vec![rat(2, 1), rat(1, 1)], vec![rat(1, 1), rat(-1, 1)]];
        let b = vec![rat(5, 1), rat(1, 1)];
        assert_eq!(solve_exact(&a, &b).unwrap(), vec![rat(2, 1), rat(1, 1)]);
    }

    #[test]
    fn exact_with_rational_entries() {
        // (1/3)x = 1/7  →  x = 3/7
        let a = vec![vec![rat(1, 3)]];
        let b = vec![rat(1, 7)];
        assert_eq!(solve_exact(&a, &b).unwrap(), vec![rat(3, 7)]);
    }

    #[test]
    fn singular_is_detected() {
        let a = vec![vec![rat(1, 1), rat(1, 1)], vec![rat(2, 1), rat(2, 1)]];
        let b = vec![rat(1, 1), rat(2, 1)];
        assert!(matches!(
            solve_exact(&a, &b),
            Err(FiniteError::SingularSystem)
        ));
    }

    #[test]
    fn needs_row_swap() {
        let a = vec![vec![rat(0, 1), rat(1, 1)], vec![rat(1, 1), rat(0, 1)]];
        let b = vec![rat(3, 1), rat(4, 1)];
        assert_eq!(solve_exact(&a, &b).unwrap(), vec![rat(4, 1), rat(3, 1)]);
    }
}
