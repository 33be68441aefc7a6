//! Signed power functions used by the sliding-mode injection terms.

/// Closed interval of reals, used for the set-valued sign at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    /// Lower endpoint.
    pub lo: f64,
    /// Upper endpoint.
    pub hi: f64,
}

impl Interval {
    /// Whether `v` lies in the interval (endpoints included).
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// The signed power `|y|^p sign(y)` for `p > 0`.
///
/// Odd in `y`, and zero at `y = 0` for every positive exponent.
pub fn signed_power(y: f64, p: f64) -> f64 {
    debug_assert!(p > 0.0, "exponent must be positive, use signed_power_zero");
    if y == 0.0 {
        0.0
    } else {
        y.abs().powf(p) * y.signum()
    }
}

/// `|y|^n sign(y)` for integer `n >= 1`, computed with `powi`.
pub(crate) fn signed_powi(y: f64, n: i32) -> f64 {
    debug_assert!(n >= 1);
    if y == 0.0 {
        0.0
    } else {
        y.abs().powi(n) * y.signum()
    }
}

/// The set-valued signed power with exponent zero: `{sign(y)}` for `y != 0`
/// and the full interval `[-1, 1]` at `y = 0`.
///
/// Callers pick an element of the interval when solving the implicit step;
/// the selection is what puts the differentiator into sliding mode.
pub fn signed_power_zero(y: f64) -> Interval {
    if y == 0.0 {
        Interval { lo: -1.0, hi: 1.0 }
    } else {
        let s = y.signum();
        Interval { lo: s, hi: s }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn cube_root_style_values() {
        assert_relative_eq!(signed_power(-8.0, 2.0 / 3.0), -4.0, max_relative = 1e-12);
        assert_relative_eq!(signed_power(8.0, 1.0 / 3.0), 2.0, max_relative = 1e-12);
        assert_eq!(signed_power(0.0, 0.5), 0.0);
        assert_eq!(signed_power(-0.0, 0.5), 0.0);
    }

    #[test]
    fn zero_exponent_interval() {
        assert_eq!(signed_power_zero(0.0), Interval { lo: -1.0, hi: 1.0 });
        assert_eq!(signed_power_zero(3.5), Interval { lo: 1.0, hi: 1.0 });
        assert_eq!(signed_power_zero(-0.1), Interval { lo: -1.0, hi: -1.0 });
        assert!(signed_power_zero(0.0).contains(0.25));
        assert!(!signed_power_zero(2.0).contains(-1.0));
    }

    proptest! {
        #[test]
        fn odd_symmetry(y in -1e6f64..1e6, p in 1e-3f64..4.0) {
            let lhs = signed_power(-y, p);
            let rhs = -signed_power(y, p);
            prop_assert!(lhs == rhs || (lhs - rhs).abs() <= 1e-12 * rhs.abs());
        }

        #[test]
        fn magnitude_matches_abs_power(y in -1e6f64..1e6, p in 1e-3f64..4.0) {
            prop_assert_eq!(signed_power(y, p).abs(), y.abs().powf(p));
        }
    }
}
