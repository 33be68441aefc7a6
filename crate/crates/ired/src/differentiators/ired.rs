//! Arbitrary-order implicit robust exact differentiator.

use crate::coeffs::{compute_coefficients, CoefficientTable};
use crate::config::{ConfigError, DifferentiatorConfig, DifferentiatorState, StepOutput};
use crate::power::signed_powi;
use crate::resolvent::{solve_resolvent, ResolventProblem};

use super::{validate_instance, Differentiator, StepError};

/// Implicit robust exact differentiator of order `m`.
///
/// Each step consumes one sample `u_k`, solves a scalar polynomial equation
/// for the normalized injection, updates the `m + 1` internal variables, and
/// emits derivative estimates `y_1 .. y_m` as linear combinations of the
/// updated variables. For signals whose `(m+1)`-th derivative is bounded by
/// `L`, noise-free estimates converge to the true derivatives up to an
/// `O(T^{m+1-i})` error with a known tight constant.
#[derive(Debug, Clone)]
pub struct Ired {
    config: DifferentiatorConfig,
    coeffs: CoefficientTable,
    state: DifferentiatorState,
}

impl Ired {
    /// Builds a differentiator with an all-zero initial state.
    pub fn new(config: DifferentiatorConfig) -> Result<Self, ConfigError> {
        let state = DifferentiatorState::zero(config.m);
        Self::with_state(config, state)
    }

    /// Builds a differentiator starting from the given state.
    pub fn with_state(
        config: DifferentiatorConfig,
        state: DifferentiatorState,
    ) -> Result<Self, ConfigError> {
        validate_instance(&config, &state)?;
        let coeffs = compute_coefficients(config.m);
        Ok(Self {
            config,
            coeffs,
            state,
        })
    }

    pub fn config(&self) -> &DifferentiatorConfig {
        &self.config
    }

    pub fn coeffs(&self) -> &CoefficientTable {
        &self.coeffs
    }

    pub fn state(&self) -> &DifferentiatorState {
        &self.state
    }

    /// Replaces the internal state, e.g. with one from
    /// [`init_from_derivatives`](super::init_from_derivatives).
    pub fn set_state(&mut self, state: DifferentiatorState) -> Result<(), ConfigError> {
        validate_instance(&self.config, &state)?;
        self.state = state;
        Ok(())
    }

    /// Consumes the sample `u` taken at time `k T` and returns derivative
    /// estimates for that time.
    pub fn step(&mut self, u: f64) -> Result<StepOutput, StepError> {
        let m = self.config.m;
        let t = self.config.sample_time;
        let big_l = self.config.lipschitz;
        let lambdas = &self.config.lambdas;
        let z = &mut self.state.z;

        // Innovation against the predicted sample.
        let mut b = u;
        let mut tp = 1.0;
        for zi in z.iter() {
            b -= tp * zi;
            tp *= t;
        }

        let threshold = self.config.sliding_threshold();
        let sliding = b.abs() <= threshold;
        let (rho_hat, epsilon_bound) = if sliding {
            z[m] += b / t.powi(m as i32);
            (0.0, 0.0)
        } else {
            let rhs = b.abs() / (big_l * t.powi(m as i32 + 1));
            let r = solve_resolvent(&ResolventProblem {
                m,
                lambdas,
                rhs,
                residual_tol: self.config.residual_tol,
            })?;
            z[m] += lambdas[m] * big_l * t * b.signum();
            (
                r * b.signum(),
                self.config.residual_tol * big_l * t.powi(m as i32 + 1),
            )
        };

        for i in (1..=m).rev() {
            let pow = (m - i + 1) as i32;
            z[i - 1] += t * z[i] + lambdas[i - 1] * big_l * t.powi(pow + 1) * signed_powi(rho_hat, pow);
        }

        let mut y = vec![0.0; m];
        for i in 1..=m {
            let mut acc = 0.0;
            let mut tp = 1.0;
            for j in i..=m {
                acc += tp * self.coeffs.as_f64(i, j) * z[j];
                tp *= t;
            }
            y[i - 1] = acc;
        }

        self.state.k += 1;
        Ok(StepOutput {
            y,
            sliding,
            rho_hat,
            b,
            epsilon_bound,
        })
    }
}

impl Differentiator for Ired {
    fn step(&mut self, u: f64) -> Result<StepOutput, StepError> {
        Ired::step(self, u)
    }

    fn outputs(&self) -> usize {
        self.config.m
    }

    fn state_vector(&self) -> Vec<f64> {
        self.state.z.clone()
    }

    fn counter(&self) -> u64 {
        self.state.k
    }

    fn sample_time(&self) -> f64 {
        self.config.sample_time
    }
}
