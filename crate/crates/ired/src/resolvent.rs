//! Scalar root solve for the implicit step.
//!
//! Each non-sliding step requires the positive root of the monic polynomial
//!
//! ```text
//! P(r) = r^{m+1} + lambda_1 r^m + ... + lambda_m r + lambda_{m+1} - rhs
//! ```
//!
//! with `rhs > lambda_{m+1}`. `P` is then negative at zero and strictly
//! increasing for `r > 0`, so the positive root exists, is unique, and is
//! trivially bracketed. The solver runs Newton iterations clamped to a
//! maintained sign-change bracket, falling back to bisection whenever a
//! Newton step leaves the bracket, and stops once the residual tolerance `R`
//! is met. The returned value is always re-checked against the tolerance.

use std::error::Error;
use std::fmt;

/// One root-finding problem; borrows the gain slice from the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventProblem<'a> {
    /// Differentiation order `m`.
    pub m: usize,
    /// Gains `lambda_1 .. lambda_{m+1}`.
    pub lambdas: &'a [f64],
    /// Normalized innovation magnitude `|b| / (L T^{m+1})`; must exceed
    /// `lambda_{m+1}` for a positive root to exist.
    pub rhs: f64,
    /// Residual tolerance `R >= 0`. Zero means "iterate until the bracket
    /// collapses to a few ulp", the closest float approximation of the exact
    /// root.
    pub residual_tol: f64,
}

/// Root solve failure.
#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    /// The residual contract could not be met within the iteration budget.
    IterationLimitExceeded {
        /// Iterations spent.
        iterations: u32,
        /// Best residual magnitude seen.
        residual: f64,
    },
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::IterationLimitExceeded {
                iterations,
                residual,
            } => write!(
                f,
                "root solve did not meet the residual tolerance in {iterations} iterations \
                 (best residual {residual:e})"
            ),
        }
    }
}

impl Error for SolveError {}

const ITERATION_BUDGET: u32 = 200;

/// Polynomial value `P(r)` evaluated by Horner's scheme.
fn poly(p: &ResolventProblem<'_>, r: f64) -> f64 {
    let mut acc = 1.0;
    for &l in p.lambdas {
        acc = acc * r + l;
    }
    acc - p.rhs
}

/// Derivative `P'(r)`.
fn poly_deriv(p: &ResolventProblem<'_>, r: f64) -> f64 {
    let n = p.lambdas.len(); // m + 1
    let mut acc = n as f64;
    for (i, &l) in p.lambdas[..n - 1].iter().enumerate() {
        acc = acc * r + (n - 1 - i) as f64 * l;
    }
    acc
}

/// Solves for the positive root `r` with `|P(r)| <= R`.
///
/// Preconditions: all gains positive, `rhs > lambda_{m+1}`, inputs finite.
/// Violations surface as [`SolveError::IterationLimitExceeded`].
pub fn solve_resolvent(problem: &ResolventProblem<'_>) -> Result<f64, SolveError> {
    let tol = problem.residual_tol;
    let inv = 1.0 / (problem.m as f64 + 1.0);
    let mut iterations = 0u32;

    // Bracket: P(0) = lambda_{m+1} - rhs < 0; at max(1, rhs^{1/(m+1)}) the
    // polynomial is usually already nonnegative, double until it is.
    let mut lo = 0.0f64;
    let mut hi = problem.rhs.powf(inv).max(1.0);
    let mut best = (f64::INFINITY, 0.0f64);
    while !(poly(problem, hi) >= 0.0) {
        hi *= 2.0;
        iterations += 1;
        if iterations >= ITERATION_BUDGET || !hi.is_finite() {
            return Err(SolveError::IterationLimitExceeded {
                iterations,
                residual: best.0,
            });
        }
    }

    let mut x = problem.rhs.powf(inv).min(hi);
    while iterations < ITERATION_BUDGET {
        iterations += 1;
        let f = poly(problem, x);
        if f.abs() < best.0 {
            best = (f.abs(), x);
        }
        if f == 0.0 || (tol > 0.0 && f.abs() <= tol) {
            return check(problem, x, lo, hi);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if tol == 0.0 && bracket_collapsed(lo, hi) {
            return check(problem, best.1, lo, hi);
        }
        let d = poly_deriv(problem, x);
        let newton = x - f / d;
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(SolveError::IterationLimitExceeded {
        iterations,
        residual: best.0,
    })
}

/// Whether `[lo, hi]` has shrunk to the float resolution limit (about 4 ulp).
fn bracket_collapsed(lo: f64, hi: f64) -> bool {
    hi - lo <= 4.0 * (f64::EPSILON * hi.abs()).max(f64::MIN_POSITIVE)
}

/// Re-evaluates the residual of a candidate root and enforces the contract.
fn check(
    problem: &ResolventProblem<'_>,
    x: f64,
    lo: f64,
    hi: f64,
) -> Result<f64, SolveError> {
    let residual = poly(problem, x);
    let ok = if problem.residual_tol > 0.0 {
        residual.abs() <= problem.residual_tol
    } else {
        residual == 0.0 || bracket_collapsed(lo, hi)
    };
    if ok && x > 0.0 {
        Ok(x)
    } else {
        Err(SolveError::IterationLimitExceeded {
            iterations: ITERATION_BUDGET,
            residual: residual.abs(),
        })
    }
}
