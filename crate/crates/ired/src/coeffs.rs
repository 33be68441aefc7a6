//! Output coefficients of the differentiator, computed in exact rational
//! arithmetic.
//!
//! The derivative estimates are linear combinations of the observer states
//! with weights `c(i, j)`. The weights satisfy the recursion
//!
//! ```text
//! c(0, 0) = 1,    c(i, 0) = c(0, j) = 0 otherwise,
//! c(i, j) = ((j - 1) c(i, j - 1) + i c(i - 1, j - 1)) / j    for i, j >= 1,
//! ```
//!
//! which yields `c(j, j) = 1` and `c(i, j) = 0` for `i > j`. A float-valued
//! recursion drifts, so the table is computed with arbitrary-precision
//! rationals and converted to `f64` once, at construction.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Exact table of the output coefficients `c(i, j)` for `0 <= i, j <= m + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    m: usize,
    exact: Vec<Vec<BigRational>>,
    float: Vec<Vec<f64>>,
}

/// Computes the coefficient table for differentiation order `m >= 1`.
///
/// # Panics
///
/// Panics if `m == 0`.
pub fn compute_coefficients(m: usize) -> CoefficientTable {
    assert!(m >= 1, "differentiation order must be at least 1");
    let n = m + 2;
    let mut exact = vec![vec![BigRational::zero(); n]; n];
    exact[0][0] = BigRational::one();
    for j in 1..n {
        for i in 1..n {
            let prev = &exact[i][j - 1] * BigInt::from(j - 1)
                + &exact[i - 1][j - 1] * BigInt::from(i);
            exact[i][j] = prev / BigInt::from(j);
        }
    }
    let float = exact
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| v.to_f64().expect("coefficient representable as f64"))
                .collect()
        })
        .collect();
    CoefficientTable { m, exact, float }
}

impl CoefficientTable {
    /// Differentiation order the table was built for.
    pub fn order(&self) -> usize {
        self.m
    }

    /// Exact value of `c(i, j)`.
    ///
    /// # Panics
    ///
    /// Panics if `i` or `j` exceeds `m + 1`.
    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.exact[i][j]
    }

    /// `c(i, j)` rounded to the nearest `f64`.
    ///
    /// # Panics
    ///
    /// Panics if `i` or `j` exceeds `m + 1`.
    pub fn as_f64(&self, i: usize, j: usize) -> f64 {
        self.float[i][j]
    }
}

/// Binomial coefficient `n` choose `k` as an `f64`.
///
/// Exact for the small arguments used in the accuracy bounds.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio(num: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    #[test]
    fn boundary_values() {
        let table = compute_coefficients(4);
        assert_eq!(*table.get(0, 0), BigRational::one());
        for j in 1..=5 {
            assert_eq!(*table.get(0, j), BigRational::zero());
            assert_eq!(*table.get(j, 0), BigRational::zero());
            assert_eq!(*table.get(j, j), BigRational::one());
        }
        // Entries below the diagonal stay zero.
        assert_eq!(*table.get(3, 2), BigRational::zero());
        assert_eq!(*table.get(5, 1), BigRational::zero());
    }

    #[test]
    fn known_entries() {
        let table = compute_coefficients(6);
        assert_eq!(*table.get(1, 2), ratio(1, 2));
        assert_eq!(*table.get(1, 4), ratio(1, 4));
        assert_eq!(*table.get(2, 3), ratio(1, 1));
        assert_eq!(*table.get(2, 6), ratio(137, 180));
        assert_eq!(*table.get(3, 4), ratio(3, 2));
        assert_eq!(*table.get(4, 7), ratio(7, 2));
    }

    #[test]
    fn first_row_is_reciprocal() {
        let table = compute_coefficients(9);
        for j in 1..=10 {
            assert_eq!(*table.get(1, j), ratio(1, j as i64));
        }
    }

    #[test]
    fn float_view_matches_exact() {
        let table = compute_coefficients(5);
        for i in 0..=6 {
            for j in 0..=6 {
                let expected = table.get(i, j).to_f64().unwrap();
                assert_eq!(table.as_f64(i, j), expected);
            }
        }
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(4, 0), 1.0);
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(6, 3), 20.0);
        assert_eq!(binomial(3, 5), 0.0);
    }

    #[test]
    #[should_panic(expected = "at least 1")]
    fn zero_order_rejected() {
        compute_coefficients(0);
    }
}
