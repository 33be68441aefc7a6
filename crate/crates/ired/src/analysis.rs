//! Analysis tools: reference divided differences of a signal, estimation
//! error coordinates and their transition map, the sliding invariant set,
//! and the Lyapunov functions used in the convergence argument.
//!
//! These exist to make the convergence and accuracy claims testable rather
//! than to run a differentiator; nothing here is needed in a control loop.

use crate::config::DifferentiatorConfig;
use crate::differentiators::StepError;
use crate::power::{signed_power, signed_powi};
use crate::resolvent::{solve_resolvent, ResolventProblem};
use crate::tuning::{TuningConstants, TuningError};
use std::error::Error;
use std::fmt;

/// Failure accessing analysis data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    /// Requested divided difference lies outside the computed table.
    IndexOutOfWindow {
        i: usize,
        k: usize,
        rows: usize,
        cols: usize,
    },
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::IndexOutOfWindow { i, k, rows, cols } => write!(
                f,
                "divided difference ({i}, {k}) outside table of {rows} rows and {cols} columns"
            ),
        }
    }
}

impl Error for AnalysisError {}

/// Iterated divided differences `g_{i,k}` of a sampled signal.
///
/// Row 1 holds the shifted samples `g_{1,k} = f((k-1) T)` and each further
/// row the scaled difference `g_{i+1,k} = (g_{i,k} - g_{i,k-1}) / T`; these
/// are the reference values that a converged differentiator's internal
/// variables track exactly. Rows run from 1 to `m + 2`, so the last row is
/// the disturbance driving the estimation error. Columns `k = 0 .. k_max`
/// are backed by evaluations of the signal at times down to `-(m + 2) T`;
/// the signal callable must extend to negative times, typically by its
/// Taylor polynomial of order `m` at zero.
#[derive(Debug, Clone)]
pub struct DividedDifferenceTable {
    m: usize,
    sample_time: f64,
    data: Vec<Vec<f64>>,
}

impl DividedDifferenceTable {
    /// Differentiation order the table was built for.
    pub fn order(&self) -> usize {
        self.m
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    /// Largest valid column index.
    pub fn k_max(&self) -> usize {
        self.data[0].len() - 1
    }

    /// The divided difference `g_{i,k}`, `1 <= i <= m + 2`, `0 <= k <= k_max`.
    pub fn get(&self, i: usize, k: usize) -> Result<f64, AnalysisError> {
        if i < 1 || i > self.m + 2 || k >= self.data[0].len() {
            return Err(AnalysisError::IndexOutOfWindow {
                i,
                k,
                rows: self.m + 2,
                cols: self.data[0].len(),
            });
        }
        Ok(self.data[i - 1][k])
    }
}

/// Builds the divided difference table of `signal` for orders up to
/// `m + 2` and sample indices `0 .. k_max`.
///
/// `signal` is evaluated at times `(k - 1) T` for `k` from `-(m + 1)` to
/// `k_max`, i.e. down to `-(m + 2) T`.
pub fn divided_differences(
    signal: impl Fn(f64) -> f64,
    m: usize,
    sample_time: f64,
    k_max: usize,
) -> DividedDifferenceTable {
    let pad = m + 1;
    // Row 1 over the padded index range k = -pad .. k_max.
    let mut row: Vec<f64> = (0..=k_max + pad)
        .map(|j| signal((j as f64 - pad as f64 - 1.0) * sample_time))
        .collect();
    let mut data = vec![row[pad..].to_vec()];
    for _ in 2..=(m + 2) {
        for j in (1..row.len()).rev() {
            row[j] = (row[j] - row[j - 1]) / sample_time;
        }
        row.remove(0);
        data.push(row[row.len() - (k_max + 1)..].to_vec());
    }
    DividedDifferenceTable {
        m,
        sample_time,
        data,
    }
}

/// Estimation errors `x_i = z_i - g_{i,k}` of a state against column `k` of
/// the reference table.
pub fn error_states(
    z: &[f64],
    table: &DividedDifferenceTable,
    k: usize,
) -> Result<Vec<f64>, AnalysisError> {
    assert_eq!(z.len(), table.order() + 1, "state length must be m + 1");
    z.iter()
        .enumerate()
        .map(|(i, zi)| Ok(zi - table.get(i + 1, k)?))
        .collect()
}

/// Whether the error vector lies in the invariant set of the sliding
/// regime: `2^{n-i+1} T^{i-1} |x_i| <= L T^n (lambda_n - 1)` for every
/// component, with `n = m + 1`.
pub fn in_invariant_set(x: &[f64], config: &DifferentiatorConfig) -> bool {
    let n = config.m + 1;
    assert_eq!(x.len(), n, "error vector length must be m + 1");
    let t = config.sample_time;
    let bound = config.lipschitz * t.powi(n as i32) * (config.lambdas[n - 1] - 1.0);
    x.iter().enumerate().all(|(idx, xi)| {
        let i = idx + 1;
        2f64.powi((n - i + 1) as i32) * t.powi(i as i32 - 1) * xi.abs() <= bound
    })
}

/// One transition of the estimation error system.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStep {
    /// Error vector after the transition.
    pub x_next: Vec<f64>,
    /// Whether the step is in discrete-time sliding mode.
    pub sliding: bool,
    /// Selected value of the normalized injection.
    pub rho_hat: f64,
}

/// Transition map of the estimation errors `x_i = z_i - g_{i,k}` driven by
/// the measurement noise `eta` and the scaled disturbance `delta` (the
/// divided difference of order `m + 2` over the window ending at the new
/// sample, bounded by `L`).
///
/// Stepping this map from `error_states` reproduces the difference between
/// a differentiator run and the reference table; it exists so convergence
/// statements can be tested directly in error coordinates.
#[derive(Debug, Clone)]
pub struct ErrorSystem {
    n: usize,
    lipschitz: f64,
    sample_time: f64,
    lambdas: Vec<f64>,
    residual_tol: f64,
}

impl ErrorSystem {
    pub fn new(config: &DifferentiatorConfig) -> Self {
        Self {
            n: config.m + 1,
            lipschitz: config.lipschitz,
            sample_time: config.sample_time,
            lambdas: config.lambdas.clone(),
            residual_tol: config.residual_tol,
        }
    }

    /// Number of error components, `m + 1`.
    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Advances the error vector by one sample.
    pub fn step(&self, x: &[f64], eta: f64, delta: f64) -> Result<ErrorStep, StepError> {
        let n = self.n;
        assert_eq!(x.len(), n, "error vector length must be m + 1");
        let t = self.sample_time;
        let big_l = self.lipschitz;

        let mut s = -eta - t.powi(n as i32) * delta;
        let mut tp = 1.0;
        for xi in x {
            s += tp * xi;
            tp *= t;
        }

        let threshold = self.lambdas[n - 1] * big_l * t.powi(n as i32);
        let sliding = s.abs() <= threshold;
        let mut x_next = x.to_vec();
        let rho_hat = if sliding {
            x_next[n - 1] -= s / t.powi(n as i32 - 1) + t * delta;
            0.0
        } else {
            let r = solve_resolvent(&ResolventProblem {
                m: n - 1,
                lambdas: &self.lambdas,
                rhs: s.abs() / (big_l * t.powi(n as i32)),
                residual_tol: self.residual_tol,
            })?;
            x_next[n - 1] -= self.lambdas[n - 1] * big_l * t * s.signum() + t * delta;
            -r * s.signum()
        };
        for i in (1..n).rev() {
            let pow = (n - i) as i32;
            x_next[i - 1] += t * x_next[i]
                + self.lambdas[i - 1] * big_l * t.powi(pow + 1) * signed_powi(rho_hat, pow);
        }
        if sliding {
            // Telescoping makes the first component exactly the noise.
            x_next[0] = eta;
        }
        Ok(ErrorStep {
            x_next,
            sliding,
            rho_hat,
        })
    }
}

/// Evaluator for the cascade of Lyapunov functions of the error system, in
/// the normalized coordinates `xi_j = x_{n-j+1} / (lambda_{n-j} L)`.
#[derive(Debug, Clone)]
pub struct LyapunovEvaluator {
    n: usize,
    alpha: Vec<f64>,
    lambdas: Vec<f64>,
    lipschitz: f64,
}

impl LyapunovEvaluator {
    pub fn new(
        constants: &TuningConstants,
        config: &DifferentiatorConfig,
    ) -> Result<Self, TuningError> {
        if constants.m != config.m {
            return Err(TuningError::OrderMismatch {
                expected: constants.m,
                got: config.m,
            });
        }
        Ok(Self {
            n: config.m + 1,
            alpha: constants.alpha.clone(),
            lambdas: config.lambdas.clone(),
            lipschitz: config.lipschitz,
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Normalized coordinates `xi_1 .. xi_n` of an error vector.
    pub fn xi(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(x.len(), n, "error vector length must be m + 1");
        (1..=n)
            .map(|j| {
                let lam = if j == n { 1.0 } else { self.lambdas[n - j - 1] };
                x[n - j] / (lam * self.lipschitz)
            })
            .collect()
    }

    /// Lyapunov function values `V_1 .. V_n` of an error vector.
    ///
    /// `V_1 = |xi_1|` and each later value is the maximum of its
    /// predecessor and a deviation term comparing `xi_j` with `xi_{j-1}`;
    /// the sequence is nondecreasing by construction.
    pub fn v(&self, x: &[f64]) -> Vec<f64> {
        let xi = self.xi(x);
        let mut v = vec![xi[0].abs()];
        for j in 2..=self.n {
            let jf = j as f64;
            let dev = signed_power(xi[j - 1], (jf - 1.0) / jf) - xi[j - 2];
            let cand = (dev.abs() / self.alpha[j - 1]).powf(1.0 / (jf - 1.0));
            v.push(v[j - 2].max(cand));
        }
        v
    }
}

/// Convenience wrapper returning `(V values, xi coordinates)` of an error
/// vector.
pub fn lyapunov(evaluator: &LyapunovEvaluator, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (evaluator.v(x), evaluator.xi(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::differentiators::init_from_derivatives;
    use crate::tuning::compute_constants;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn squared_time_divided_differences() {
        let table = divided_differences(|t| t * t, 2, 1.0, 5);
        assert_eq!(table.get(1, 3).unwrap(), 4.0);
        assert_eq!(table.get(2, 3).unwrap(), 3.0);
        assert_eq!(table.get(3, 3).unwrap(), 2.0);
        for k in 0..=5 {
            assert_relative_eq!(table.get(4, k).unwrap(), 0.0, epsilon = 1e-12);
        }
        assert!(matches!(
            table.get(5, 0),
            Err(AnalysisError::IndexOutOfWindow { .. })
        ));
        assert!(table.get(1, 6).is_err());
    }

    #[test]
    fn constant_signal_has_vanishing_differences() {
        let table = divided_differences(|_| 7.25, 3, 0.1, 10);
        for k in 0..=10 {
            assert_eq!(table.get(1, k).unwrap(), 7.25);
            for i in 2..=5 {
                assert_eq!(table.get(i, k).unwrap(), 0.0);
            }
        }
    }

    /// With the negative-time extension by the order-m Taylor polynomial,
    /// the top divided difference stays within the Lipschitz bound from the
    /// very first column.
    #[test]
    fn extension_keeps_disturbance_within_bound() {
        let m = 2;
        let t = 0.1;
        // sin with its order-2 Taylor polynomial for t < 0; |f'''| <= 1.
        let table = divided_differences(
            |tt| if tt >= 0.0 { tt.sin() } else { tt },
            m,
            t,
            200,
        );
        for k in 0..=200 {
            let d = table.get(m + 2, k).unwrap();
            assert!(d.abs() <= 1.0 + 1e-9, "k = {k}: {d}");
        }
    }

    /// Initializing from known derivatives reproduces the reference
    /// divided differences of the extended signal at column 1.
    #[test]
    fn derivative_init_matches_reference_column() {
        let m = 3;
        let t = 0.1;
        let cfg = DifferentiatorConfig::new(m, 9.0, t, vec![3.0, 4.16, 3.06, 1.1], 0.0).unwrap();
        // f(t) = sin(2t) + 1; derivatives 2 cos 2t, -4 sin 2t, -8 cos 2t.
        let derivs = [2.0, 0.0, -8.0];
        let st = init_from_derivatives(&cfg, 1.0, &derivs);
        let taylor = |tt: f64| 1.0 + 2.0 * tt - 8.0 / 6.0 * tt.powi(3);
        let table = divided_differences(
            |tt| if tt >= 0.0 { (2.0 * tt).sin() + 1.0 } else { taylor(tt) },
            m,
            t,
            2,
        );
        for i in 1..=m + 1 {
            assert_relative_eq!(
                st.z[i - 1],
                table.get(i, 1).unwrap(),
                max_relative = 1e-12,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn invariant_set_boundary() {
        let cfg = DifferentiatorConfig::new(2, 2.0, 0.1, vec![6.0, 8.0, 1.5], 0.0).unwrap();
        let n = 3;
        let bound = 2.0 * 0.1f64.powi(3) * 0.5;
        let mk = |f: f64| -> Vec<f64> {
            (1..=n)
                .map(|i| f * bound / (2f64.powi((n - i + 1) as i32) * 0.1f64.powi(i as i32 - 1)))
                .collect()
        };
        assert!(in_invariant_set(&mk(0.999), &cfg));
        assert!(!in_invariant_set(&mk(1.001), &cfg));
        let mut one_off = mk(0.5);
        one_off[2] = -1.001 * bound / (2.0 * 0.1f64.powi(2));
        assert!(!in_invariant_set(&one_off, &cfg));
        assert!(in_invariant_set(&[0.0, 0.0, 0.0], &cfg));
    }

    /// In sliding mode the first error component becomes exactly the noise
    /// sample.
    #[test]
    fn sliding_transitions_assign_the_noise() {
        let cfg = DifferentiatorConfig::new(2, 1.0, 0.1, vec![6.0, 8.0, 1.5], 0.0).unwrap();
        let sys = ErrorSystem::new(&cfg);
        let eta = 3.25e-4;
        let out = sys.step(&[2e-4, -1e-3, 4e-2], eta, 0.7).unwrap();
        assert!(out.sliding);
        assert_eq!(out.x_next[0], eta);
    }

    proptest! {
        /// The normalized coordinates are bounded by powers of the
        /// Lyapunov values: |xi_j| <= beta_j^j V_j^j.
        #[test]
        fn lyapunov_values_dominate_coordinates(
            m in 1usize..=4,
            seed in prop::collection::vec(-5.0f64..5.0, 5),
        ) {
            let lambdas: Vec<f64> = (0..=m).map(|i| 2.0 + 2.0 / (i as f64 + 1.0)).collect();
            let cfg = DifferentiatorConfig::new(m, 1.5, 0.1, lambdas, 0.0).unwrap();
            let c = compute_constants(m, &vec![1.5; m], &cfg).unwrap();
            let ev = LyapunovEvaluator::new(&c, &cfg).unwrap();
            let x = &seed[..m + 1];
            let (v, xi) = lyapunov(&ev, x);
            for j in 1..=m + 1 {
                if j >= 2 {
                    prop_assert!(v[j - 1] >= v[j - 2]);
                }
                let bound = (c.beta(j) * v[j - 1]).powi(j as i32);
                prop_assert!(
                    xi[j - 1].abs() <= bound * (1.0 + 1e-9) + 1e-300,
                    "j = {}, xi = {}, bound = {}", j, xi[j - 1], bound
                );
            }
        }
    }
}
