//! Baseline implicit differentiators kept for comparison.
//!
//! These are earlier implicit discretizations without the linear-combination
//! output stage. [`Hidd1`] chatters persistently on worst-case signals and
//! [`IhddFamily`] carries a bias, or for its degenerate coupling a whole
//! family of chattering solutions; the main differentiator removes both
//! effects.

use crate::config::{ConfigError, DifferentiatorConfig, DifferentiatorState, StepOutput};
use crate::resolvent::{solve_resolvent, ResolventProblem};

use super::{validate_instance, Differentiator, StepError};

fn require_order(config: &DifferentiatorConfig, expected: usize) -> Result<(), ConfigError> {
    if config.m != expected {
        return Err(ConfigError::OrderMismatch {
            expected,
            got: config.m,
        });
    }
    Ok(())
}

/// First-order homogeneous implicit discrete differentiator.
///
/// Two internal variables, gains `lambda_1, lambda_2`. The implicit step
/// reduces to a quadratic in `sqrt(|u - z_1'|)` and is solved in closed
/// form. The estimate `y_1 = z_2'` chatters with amplitude
/// `lambda_2 L T / 2` on worst-case signals.
///
/// In the output, `rho_hat` carries the selected element of the set-valued
/// sign and `b` the innovation `u - z_1 - T z_2`.
#[derive(Debug, Clone)]
pub struct Hidd1 {
    config: DifferentiatorConfig,
    state: DifferentiatorState,
}

impl Hidd1 {
    /// Builds the differentiator from an order-1 configuration, starting at
    /// zero.
    pub fn new(config: DifferentiatorConfig) -> Result<Self, ConfigError> {
        require_order(&config, 1)?;
        let state = DifferentiatorState::zero(1);
        validate_instance(&config, &state)?;
        Ok(Self { config, state })
    }

    pub fn config(&self) -> &DifferentiatorConfig {
        &self.config
    }

    pub fn state(&self) -> &DifferentiatorState {
        &self.state
    }

    pub fn set_state(&mut self, state: DifferentiatorState) -> Result<(), ConfigError> {
        validate_instance(&self.config, &state)?;
        self.state = state;
        Ok(())
    }

    pub fn step(&mut self, u: f64) -> Result<StepOutput, StepError> {
        let t = self.config.sample_time;
        let big_l = self.config.lipschitz;
        let (l1, l2) = (self.config.lambdas[0], self.config.lambdas[1]);
        let (z1, z2) = (self.state.z[0], self.state.z[1]);

        let beta = u - z1 - t * z2;
        let half = 0.5 * l2 * big_l * t * t;
        let sliding = beta.abs() <= half;
        let (z1n, z2n, xi) = if sliding {
            // Selection from the sign interval keeps z_1' = u exactly.
            (u, z2 + 2.0 * beta / t, beta / half)
        } else {
            let p = t * l1 * big_l.sqrt();
            // Positive root of s^2 + p s - (|beta| - half) = 0.
            let s = 0.5 * (-p + (p * p + 4.0 * (beta.abs() - half)).sqrt());
            let e = beta.signum() * s * s;
            (u - e, z2 + t * l2 * big_l * beta.signum(), beta.signum())
        };
        self.state.z[0] = z1n;
        self.state.z[1] = z2n;
        self.state.k += 1;
        Ok(StepOutput {
            y: vec![z2n],
            sliding,
            rho_hat: xi,
            b: beta,
            epsilon_bound: 0.0,
        })
    }
}

impl Differentiator for Hidd1 {
    fn step(&mut self, u: f64) -> Result<StepOutput, StepError> {
        Hidd1::step(self, u)
    }

    fn outputs(&self) -> usize {
        1
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

/// Second-order implicit discrete differentiator family with coupling
/// parameter `c`.
///
/// Three internal variables, gains `lambda_1 .. lambda_3`; the parameter
/// couples the highest correction term into the first row with weight
/// `c T^2 / 2` and must satisfy `c > -2`. Estimates are `y_1 = z_2'` and
/// `y_2 = z_3'`. On worst-case parabolic signals `y_1` carries the constant
/// bias `(1 + c) f''' .. t`-style term; at `c = -1` the bias vanishes but a
/// one-parameter family of chattering solutions appears.
///
/// In the output, `rho_hat` carries the selected sign element on sliding
/// steps and the normalized root otherwise.
#[derive(Debug, Clone)]
pub struct IhddFamily {
    config: DifferentiatorConfig,
    coupling: f64,
    resolvent_lambdas: [f64; 3],
    state: DifferentiatorState,
}

impl IhddFamily {
    /// Builds the differentiator from an order-2 configuration and the
    /// coupling parameter `c > -2`, starting at zero.
    pub fn new(config: DifferentiatorConfig, coupling: f64) -> Result<Self, ConfigError> {
        require_order(&config, 2)?;
        let state = DifferentiatorState::zero(2);
        validate_instance(&config, &state)?;
        if !(1.0 + 0.5 * coupling > 0.0) || !coupling.is_finite() {
            return Err(ConfigError::NotPositive("1 + c/2"));
        }
        let resolvent_lambdas = [
            config.lambdas[0],
            config.lambdas[1],
            (1.0 + 0.5 * coupling) * config.lambdas[2],
        ];
        Ok(Self {
            config,
            coupling,
            resolvent_lambdas,
            state,
        })
    }

    pub fn config(&self) -> &DifferentiatorConfig {
        &self.config
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn state(&self) -> &DifferentiatorState {
        &self.state
    }

    pub fn set_state(&mut self, state: DifferentiatorState) -> Result<(), ConfigError> {
        validate_instance(&self.config, &state)?;
        self.state = state;
        Ok(())
    }

    pub fn step(&mut self, u: f64) -> Result<StepOutput, StepError> {
        let t = self.config.sample_time;
        let big_l = self.config.lipschitz;
        let (l2, l3) = (self.config.lambdas[1], self.config.lambdas[2]);
        let w = 1.0 + 0.5 * self.coupling;
        let (z1, z2, z3) = (self.state.z[0], self.state.z[1], self.state.z[2]);

        let beta = u - z1 - t * z2 - w * t * t * z3;
        let threshold = w * l3 * big_l * t.powi(3);
        let sliding = beta.abs() <= threshold;
        let (z1n, z2n, z3n, rho, eps) = if sliding {
            let z3n = z3 + beta / (w * t * t);
            (u, z2 + t * z3n, z3n, beta / threshold, 0.0)
        } else {
            let r = solve_resolvent(&ResolventProblem {
                m: 2,
                lambdas: &self.resolvent_lambdas,
                rhs: beta.abs() / (big_l * t.powi(3)),
                residual_tol: self.config.residual_tol,
            })?;
            let sgn = beta.signum();
            let e = sgn * big_l * t.powi(3) * r.powi(3);
            let z3n = z3 + t * l3 * big_l * sgn;
            let z2n = z2 + l2 * big_l * t * t * r * sgn + t * z3n;
            (
                u - e,
                z2n,
                z3n,
                r * sgn,
                self.config.residual_tol * big_l * t.powi(3),
            )
        };
        self.state.z = vec![z1n, z2n, z3n];
        self.state.k += 1;
        Ok(StepOutput {
            y: vec![z2n, z3n],
            sliding,
            rho_hat: rho,
            b: beta,
            epsilon_bound: eps,
        })
    }
}

impl Differentiator for IhddFamily {
    fn step(&mut self, u: f64) -> Result<StepOutput, StepError> {
        IhddFamily::step(self, u)
    }

    fn outputs(&self) -> usize {
        2
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

/// Implicit super-twisting differentiator.
///
/// Its step law coincides with the first-order [`Ired`](super::Ired) after
/// absorbing the Lipschitz normalization into the gains; it is kept as a
/// separately named kind because it predates the general construction.
#[derive(Debug, Clone)]
pub struct Istd {
    inner: super::Ired,
}

impl Istd {
    /// Builds the differentiator from an order-1 configuration, starting at
    /// zero.
    pub fn new(config: DifferentiatorConfig) -> Result<Self, ConfigError> {
        require_order(&config, 1)?;
        Ok(Self {
            inner: super::Ired::new(config)?,
        })
    }

    pub fn config(&self) -> &DifferentiatorConfig {
        self.inner.config()
    }

    pub fn state(&self) -> &DifferentiatorState {
        self.inner.state()
    }

    pub fn set_state(&mut self, state: DifferentiatorState) -> Result<(), ConfigError> {
        self.inner.set_state(state)
    }

    pub fn step(&mut self, u: f64) -> Result<StepOutput, StepError> {
        self.inner.step(u)
    }
}

impl Differentiator for Istd {
    fn step(&mut self, u: f64) -> Result<StepOutput, StepError> {
        self.inner.step(u)
    }

    fn outputs(&self) -> usize {
        1
    }

    fn state_vector(&self) -> Vec<f64> {
        self.inner.state_vector()
    }

    fn counter(&self) -> u64 {
        self.inner.counter()
    }

    fn sample_time(&self) -> f64 {
        self.inner.config().sample_time
    }
}
