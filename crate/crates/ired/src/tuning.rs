//! Gain conditions, the gain tuning rule, and worst-case error bounds.
//!
//! The sufficient conditions for robust convergence are expressed through a
//! set of auxiliary constants derived from free parameters `a_1 .. a_m`,
//! each in the open interval (1, 2). [`compute_constants`] evaluates them,
//! [`check_gain_conditions`] tests a gain vector against them with margins,
//! and [`tune_gains`] produces gains satisfying them by construction.
//! [`exactness_bound`] and [`noisy_bound`] evaluate the worst-case accuracy
//! estimates in the noise-free and noisy case.

use crate::coeffs::{binomial, CoefficientTable};
use crate::config::DifferentiatorConfig;
use std::error::Error;
use std::fmt;

/// Auxiliary constants for an order-`m` differentiator, derived from the
/// parameters `a_1 .. a_m` and a gain configuration.
///
/// Sequences are stored in full; the accessor methods use the 1-based
/// indices of the defining recursions (`gamma`, `psi`, and `kappa` start at
/// index 0).
#[derive(Debug, Clone)]
pub struct TuningConstants {
    /// Differentiation order.
    pub m: usize,
    /// Parameters `a_1 .. a_m`, each in (1, 2).
    pub a: Vec<f64>,
    /// `alpha_1 .. alpha_{m+1}` with `alpha_1 = 0`.
    pub alpha: Vec<f64>,
    /// `beta_1 .. beta_{m+1}` with `beta_1 = 1`.
    pub beta: Vec<f64>,
    /// `gamma_0 .. gamma_{m+1}` with `gamma_0 = gamma_1 = 2`.
    pub gamma: Vec<f64>,
    /// Gain ratio lower bounds `mu_1 .. mu_m`.
    pub mu: Vec<f64>,
    /// Noise amplification constants `d_1 .. d_m` of the noisy bound.
    pub d: Vec<f64>,
    /// Ultimate-bound constants `psi_0 .. psi_m`.
    pub psi: Vec<f64>,
    /// Largest noise magnitude, relative to which the gain conditions
    /// guarantee convergence of the estimation errors.
    pub n_bar: f64,
    /// Consecutive gain ratios `kappa_0 .. kappa_{m+1}`, with the
    /// conventions `lambda_0 = lambda_{m+2} = 1`.
    pub kappa: Vec<f64>,
}

impl TuningConstants {
    pub fn beta(&self, j: usize) -> f64 {
        assert!((1..=self.m + 1).contains(&j));
        self.beta[j - 1]
    }

    pub fn gamma(&self, j: usize) -> f64 {
        assert!(j <= self.m + 1);
        self.gamma[j]
    }

    pub fn alpha(&self, j: usize) -> f64 {
        assert!((1..=self.m + 1).contains(&j));
        self.alpha[j - 1]
    }

    pub fn mu(&self, j: usize) -> f64 {
        assert!((1..=self.m).contains(&j));
        self.mu[j - 1]
    }

    pub fn d(&self, i: usize) -> f64 {
        assert!((1..=self.m).contains(&i));
        self.d[i - 1]
    }

    pub fn psi(&self, i: usize) -> f64 {
        assert!(i <= self.m);
        self.psi[i]
    }

    pub fn kappa(&self, j: usize) -> f64 {
        assert!(j <= self.m + 1);
        self.kappa[j]
    }
}

/// Failure computing tuning constants or tuned gains.
#[derive(Debug, Clone, PartialEq)]
pub enum TuningError {
    /// Parameter vector has the wrong length.
    ParameterCount { expected: usize, got: usize },
    /// A parameter `a_j` lies outside the open interval (1, 2).
    ParameterOutOfRange { index: usize, value: f64 },
    /// The highest gain must exceed 1 for the tuning rule.
    LastGainTooSmall { value: f64 },
    /// A tuning margin `mu_bar_j` does not exceed the bound `mu_j`.
    MarginTooSmall { index: usize, value: f64, bound: f64 },
    /// Order of the constants does not match the configuration.
    OrderMismatch { expected: usize, got: usize },
}

impl fmt::Display for TuningError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TuningError::ParameterCount { expected, got } => {
                write!(f, "expected {expected} parameters, got {got}")
            }
            TuningError::ParameterOutOfRange { index, value } => {
                write!(f, "parameter a_{index} = {value} is not in (1, 2)")
            }
            TuningError::LastGainTooSmall { value } => {
                write!(f, "highest gain {value} must exceed 1")
            }
            TuningError::MarginTooSmall { index, value, bound } => {
                write!(f, "margin mu_bar_{index} = {value} must exceed mu_{index} = {bound}")
            }
            TuningError::OrderMismatch { expected, got } => {
                write!(f, "constants are for order {expected}, configuration has order {got}")
            }
        }
    }
}

impl Error for TuningError {}

/// Evaluates the auxiliary constant sequences for order `m`, parameters
/// `a = [a_1 .. a_m]`, and the gains in `config`.
pub fn compute_constants(
    m: usize,
    a: &[f64],
    config: &DifferentiatorConfig,
) -> Result<TuningConstants, TuningError> {
    if config.m != m {
        return Err(TuningError::OrderMismatch {
            expected: m,
            got: config.m,
        });
    }
    if a.len() != m {
        return Err(TuningError::ParameterCount {
            expected: m,
            got: a.len(),
        });
    }
    for (j, aj) in a.iter().enumerate() {
        if !(*aj > 1.0 && *aj < 2.0) {
            return Err(TuningError::ParameterOutOfRange {
                index: j + 1,
                value: *aj,
            });
        }
    }

    let n = m + 1;
    let mut beta = vec![1.0f64];
    let mut gamma = vec![2.0f64, 2.0];
    let mut alpha = vec![0.0f64];
    let mut mu = Vec::with_capacity(m);
    for j in 1..=m {
        let aj = a[j - 1];
        let jf = j as f64;
        let gj = gamma[j];
        let bj = beta[j - 1];
        let bnext = (bj.powi(j as i32) + aj / gj.powi(j as i32)).powf(1.0 / jf);
        beta.push(bnext);
        gamma.push((2.0 / (2.0 - aj)).powf(1.0 / jf) * gj);
        alpha.push(aj / gj.powi(j as i32));
        let gprev = gamma[j - 1];
        mu.push((jf + 1.0) / jf * gj.powi(j as i32) / gprev.powi(j as i32 - 1) * bnext
            / (aj - 1.0));
    }

    let lam = |i: usize| -> f64 {
        // Gains with the conventions lambda_0 = lambda_{n+1} = 1.
        if i == 0 || i == n + 1 {
            1.0
        } else {
            config.lambdas[i - 1]
        }
    };
    let t = config.sample_time;
    let big_l = config.lipschitz;
    let coeffs = crate::coeffs::compute_coefficients(m);
    let root2 = 2f64.powf(1.0 / n as f64);
    let gn = gamma[n];

    let mut d = Vec::with_capacity(m);
    for i in 1..=m {
        let mut best = f64::NEG_INFINITY;
        for p in 1..=(m - i + 1) {
            let inner = lam(m - p + 1) * coeffs.as_f64(i, m - p + 1)
                / (binomial(m - i + 1, p) * coeffs.as_f64(i, m + 1));
            let cand = beta[p - 1] * gn / root2 * inner.powf(1.0 / p as f64);
            best = best.max(cand);
        }
        d.push(best);
    }

    let mut psi = Vec::with_capacity(m + 1);
    for i in 0..=m {
        psi.push(lam(i) * (beta[n - i - 1] * gn / root2).powi((n - i) as i32));
    }

    let mut n_bar = f64::INFINITY;
    for p in 0..=m {
        let cand = big_l * t.powi(n as i32)
            / (2f64.powi(m as i32) * beta[m - p].powi(n as i32) * gn.powi(n as i32))
            * ((lam(n) - 1.0) / lam(p)).powf(n as f64 / (m - p + 1) as f64);
        n_bar = n_bar.min(cand);
    }

    let kappa: Vec<f64> = (0..=n).map(|j| lam(n - j + 1) / lam(n - j)).collect();

    Ok(TuningConstants {
        m,
        a: a.to_vec(),
        alpha,
        beta,
        gamma,
        mu,
        d,
        psi,
        n_bar,
        kappa,
    })
}

/// Outcome of checking a gain vector against the sufficient conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct GainConditionReport {
    /// Whether every condition holds strictly.
    pub satisfied: bool,
    /// Relative margins, positive where the condition holds: entry 0 is
    /// `lambda_{m+1} - 1`, entry `j >= 1` is the ratio by which the `j`-th
    /// gain ratio condition is met, minus one.
    pub margins: Vec<f64>,
}

/// Checks the gains in `config` against the sufficient convergence
/// conditions for the constants in `constants`.
pub fn check_gain_conditions(
    config: &DifferentiatorConfig,
    constants: &TuningConstants,
) -> Result<GainConditionReport, TuningError> {
    let m = constants.m;
    if config.m != m {
        return Err(TuningError::OrderMismatch {
            expected: m,
            got: config.m,
        });
    }
    let lam = |i: usize| -> f64 {
        if i == 0 {
            1.0
        } else {
            config.lambdas[i - 1]
        }
    };
    let mut margins = vec![lam(m + 1) - 1.0];
    for j in 1..=m {
        let lhs = lam(m - j + 1) / lam(m - j);
        let rhs = lam(m - j + 2) / lam(m - j + 1) * constants.mu(j);
        margins.push(lhs / rhs - 1.0);
    }
    let satisfied = margins.iter().all(|v| *v > 0.0);
    Ok(GainConditionReport { satisfied, margins })
}

/// Produces gains `lambda_1 .. lambda_{m+1}` satisfying the sufficient
/// conditions, from the highest gain `lambda_last > 1` and per-index
/// margins `mu_bar_j > mu_j` (default `1.1 mu_j`).
pub fn tune_gains(
    constants: &TuningConstants,
    lambda_last: f64,
    mu_bar: Option<&[f64]>,
) -> Result<Vec<f64>, TuningError> {
    let m = constants.m;
    if !(lambda_last > 1.0) {
        return Err(TuningError::LastGainTooSmall { value: lambda_last });
    }
    let defaults: Vec<f64>;
    let mu_bar = match mu_bar {
        Some(v) => {
            if v.len() != m {
                return Err(TuningError::ParameterCount {
                    expected: m,
                    got: v.len(),
                });
            }
            v
        }
        None => {
            defaults = constants.mu.iter().map(|mu| 1.1 * mu).collect();
            &defaults
        }
    };
    for j in 1..=m {
        if !(mu_bar[j - 1] > constants.mu(j)) {
            return Err(TuningError::MarginTooSmall {
                index: j,
                value: mu_bar[j - 1],
                bound: constants.mu(j),
            });
        }
    }

    // Product over k = 1..=k_hi of the partial products of mu_bar.
    let nested = |k_lo: usize, k_hi: usize| -> f64 {
        let mut acc = 1.0;
        for k in k_lo..=k_hi {
            for mb in &mu_bar[..k] {
                acc *= mb;
            }
        }
        acc
    };
    let n = m + 1;
    let full = nested(1, m);
    let mut lambdas = Vec::with_capacity(n);
    for j in 1..=m {
        let jf = j as f64 / n as f64;
        lambdas.push(lambda_last.powf(jf) * nested(m - j + 1, m) / full.powf(jf));
    }
    lambdas.push(lambda_last);
    Ok(lambdas)
}

/// Worst-case estimation error `c(i, m+1) M T^{m+1-i}` of the i-th
/// derivative in the noise-free case, for signals whose (m+1)-th derivative
/// is bounded by `M`. Attained with equality on a worst-case polynomial.
pub fn exactness_bound(i: usize, m: usize, big_m: f64, t: f64, coeffs: &CoefficientTable) -> f64 {
    assert!((1..=m).contains(&i));
    coeffs.as_f64(i, m + 1) * big_m * t.powi((m + 1 - i) as i32)
}

/// Worst-case estimation error of the i-th derivative under measurement
/// noise of magnitude `noise`, once the errors have converged.
pub fn noisy_bound(
    i: usize,
    coeffs: &CoefficientTable,
    constants: &TuningConstants,
    config: &DifferentiatorConfig,
    noise: f64,
) -> f64 {
    let m = constants.m;
    assert!((1..=m).contains(&i));
    assert!(noise >= 0.0);
    let big_l = config.lipschitz;
    let t = config.sample_time;
    let reach = t + constants.d(i) * (noise / big_l).powf(1.0 / (m + 1) as f64);
    coeffs.as_f64(i, m + 1) * big_l * reach.powi((m + 1 - i) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::compute_coefficients;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn config_for(m: usize, lambdas: Vec<f64>) -> DifferentiatorConfig {
        DifferentiatorConfig::new(m, 1.0, 0.1, lambdas, 0.0).unwrap()
    }

    #[test]
    fn first_order_constants_by_hand() {
        let cfg = config_for(1, vec![3.0, 1.1]);
        let c = compute_constants(1, &[1.5], &cfg).unwrap();
        assert_relative_eq!(c.beta(2), 1.75, max_relative = 1e-14);
        assert_relative_eq!(c.gamma(2), 8.0, max_relative = 1e-14);
        assert_relative_eq!(c.mu(1), 14.0, max_relative = 1e-14);
        assert_eq!(c.alpha(1), 0.0);
        assert_relative_eq!(c.alpha(2), 0.75, max_relative = 1e-14);
        assert_relative_eq!(c.kappa(0), 1.0 / 1.1, max_relative = 1e-14);
        assert_relative_eq!(c.kappa(2), 3.0, max_relative = 1e-14);
    }

    #[test]
    fn first_order_mu_closed_form() {
        for i in 0..50 {
            let a = 1.0 + 0.98 * (i as f64 + 0.5) / 50.0;
            let cfg = config_for(1, vec![3.0, 1.1]);
            let c = compute_constants(1, &[a], &cfg).unwrap();
            assert_relative_eq!(c.mu(1), (2.0 * a + 4.0) / (a - 1.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn tuned_first_order_gain_is_the_geometric_mean() {
        let cfg = config_for(1, vec![3.0, 1.1]);
        // mu_1 = (2a + 4) / (a - 1) = 8.67 at a = 1.9, so 9 is admissible.
        let c = compute_constants(1, &[1.9], &cfg).unwrap();
        let gains = tune_gains(&c, 1.1, Some(&[9.0])).unwrap();
        assert_relative_eq!(gains[0], (9.0f64 * 1.1).sqrt(), max_relative = 1e-14);
        assert_eq!(gains[1], 1.1);
    }

    #[test]
    fn rejects_bad_parameters() {
        let cfg = config_for(1, vec![3.0, 1.1]);
        assert!(matches!(
            compute_constants(1, &[2.0], &cfg),
            Err(TuningError::ParameterOutOfRange { index: 1, .. })
        ));
        assert!(matches!(
            compute_constants(2, &[1.5, 1.5], &cfg),
            Err(TuningError::OrderMismatch { .. })
        ));
        let c = compute_constants(1, &[1.5], &cfg).unwrap();
        assert!(matches!(
            tune_gains(&c, 1.0, None),
            Err(TuningError::LastGainTooSmall { .. })
        ));
        assert!(matches!(
            tune_gains(&c, 1.1, Some(&[10.0, 10.0])),
            Err(TuningError::ParameterCount { .. })
        ));
        assert!(matches!(
            tune_gains(&c, 1.1, Some(&[13.0])),
            Err(TuningError::MarginTooSmall { .. })
        ));
    }

    #[test]
    fn psi_is_consistent_with_d() {
        // psi_{n-p} c(i, n-p) <= binom(n-i, p) c(i, n) d_i^p for every
        // admissible p, with equality at the maximizing one.
        for m in 1..=5usize {
            let n = m + 1;
            let lambdas: Vec<f64> = (0..=m).map(|i| 2.0 + 3.0 / (i as f64 + 1.0)).collect();
            let cfg = config_for(m, lambdas);
            let a = vec![1.5; m];
            let c = compute_constants(m, &a, &cfg).unwrap();
            let coeffs = compute_coefficients(m);
            for i in 1..=m {
                let mut tight = f64::INFINITY;
                for p in 1..=(n - i) {
                    let lhs = c.psi(n - p) * coeffs.as_f64(i, n - p);
                    let rhs = binomial(n - i, p) * coeffs.as_f64(i, n) * c.d(i).powi(p as i32);
                    assert!(lhs <= rhs * (1.0 + 1e-12), "m={m} i={i} p={p}");
                    tight = tight.min(rhs / lhs);
                }
                assert_relative_eq!(tight, 1.0, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn noisy_bound_reduces_to_the_exact_one() {
        let cfg = config_for(3, vec![3.0, 4.16, 3.06, 1.1]);
        let c = compute_constants(3, &[1.5, 1.5, 1.5], &cfg).unwrap();
        let coeffs = compute_coefficients(3);
        for i in 1..=3 {
            let noisy = noisy_bound(i, &coeffs, &c, &cfg, 0.0);
            let exact = exactness_bound(i, 3, cfg.lipschitz, cfg.sample_time, &coeffs);
            assert_relative_eq!(noisy, exact, max_relative = 1e-14);
        }
    }

    #[test]
    fn noisy_bound_grows_with_noise() {
        let cfg = config_for(2, vec![6.0, 8.0, 1.5]);
        let c = compute_constants(2, &[1.5, 1.5], &cfg).unwrap();
        let coeffs = compute_coefficients(2);
        for i in 1..=2 {
            let mut prev = noisy_bound(i, &coeffs, &c, &cfg, 0.0);
            for step in 1..=10 {
                let cur = noisy_bound(i, &coeffs, &c, &cfg, step as f64 * 1e-3);
                assert!(cur > prev);
                prev = cur;
            }
        }
    }

    proptest! {
        /// Gains from the tuning rule satisfy the conditions they were
        /// tuned for, with margins matching the chosen mu_bar excess.
        #[test]
        fn tuned_gains_pass_the_check(
            m in 1usize..=5,
            a_seed in 0.05f64..0.95,
            lambda_last in 1.01f64..3.0,
            excess in 1.01f64..2.0,
        ) {
            let a = vec![1.0 + a_seed; m];
            let dummy = config_for(m, vec![2.0; m + 1]);
            let c = compute_constants(m, &a, &dummy).unwrap();
            let mu_bar: Vec<f64> = c.mu.iter().map(|mu| excess * mu).collect();
            let gains = tune_gains(&c, lambda_last, Some(&mu_bar)).unwrap();
            let cfg = DifferentiatorConfig::new(m, 1.0, 0.1, gains, 0.0).unwrap();
            let report = check_gain_conditions(&cfg, &c).unwrap();
            prop_assert!(report.satisfied, "margins: {:?}", report.margins);
            for j in 1..=m {
                prop_assert!((report.margins[j] - (excess - 1.0)).abs() < 1e-6 * excess);
            }
        }

        /// The largest tolerated noise is positive whenever the highest
        /// gain exceeds 1.
        #[test]
        fn noise_threshold_is_positive(
            m in 1usize..=5,
            lambda_last in 1.001f64..4.0,
        ) {
            let a = vec![1.5; m];
            let dummy = config_for(m, vec![2.0; m + 1]);
            let c = compute_constants(m, &a, &dummy).unwrap();
            let gains = tune_gains(&c, lambda_last, None).unwrap();
            let cfg = DifferentiatorConfig::new(m, 1.0, 0.1, gains, 0.0).unwrap();
            let c = compute_constants(m, &a, &cfg).unwrap();
            prop_assert!(c.n_bar > 0.0);
            prop_assert!(c.n_bar.is_finite());
        }
    }
}
