//! Filtering differentiator: differentiates `q`-times-integrated
//! measurements without an explicit prefilter.

use crate::coeffs::{compute_coefficients, CoefficientTable};
use crate::config::{ConfigError, DifferentiatorState, StepOutput};
use crate::power::{signed_power, signed_powi};
use crate::resolvent::{solve_resolvent, ResolventProblem};

use super::{Differentiator, StepError};

/// Parameters of a filtering differentiator of order `m` with filter
/// order `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteringConfig {
    /// Differentiation order `m >= 1`.
    pub m: usize,
    /// Filter order `q >= 1`; the differentiator carries `q + m + 1`
    /// internal variables.
    pub q: usize,
    /// Lipschitz bound `L > 0` on the (m+1)-th derivative of the signal.
    pub lipschitz: f64,
    /// Sampling time `T > 0` in seconds.
    pub sample_time: f64,
    /// Gains `lambda_1 .. lambda_{q+m+1}`, all positive.
    pub lambdas: Vec<f64>,
    /// Residual tolerance `R >= 0` of the per-step polynomial solve.
    pub residual_tol: f64,
}

impl FilteringConfig {
    /// Validates and builds a configuration.
    pub fn new(
        m: usize,
        q: usize,
        lipschitz: f64,
        sample_time: f64,
        lambdas: Vec<f64>,
        residual_tol: f64,
    ) -> Result<Self, ConfigError> {
        let cfg = Self {
            m,
            q,
            lipschitz,
            sample_time,
            lambdas,
            residual_tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-checks all field invariants.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.m < 1 {
            return Err(ConfigError::InvalidOrder);
        }
        if self.q < 1 {
            return Err(ConfigError::NotPositive("filter_order"));
        }
        if !(self.lipschitz > 0.0) || !self.lipschitz.is_finite() {
            return Err(ConfigError::NotPositive("lipschitz"));
        }
        if !(self.sample_time > 0.0) || !self.sample_time.is_finite() {
            return Err(ConfigError::NotPositive("sample_time"));
        }
        if self.lambdas.len() != self.total_states() {
            return Err(ConfigError::LambdaCount {
                expected: self.total_states(),
                got: self.lambdas.len(),
            });
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(ConfigError::NotPositive("lambdas"));
        }
        if !(self.residual_tol >= 0.0) || !self.residual_tol.is_finite() {
            return Err(ConfigError::Negative("residual_tol"));
        }
        Ok(())
    }

    /// Number of internal variables, `q + m + 1`.
    pub fn total_states(&self) -> usize {
        self.q + self.m + 1
    }

    /// Sliding threshold `lambda_n L T^n` with `n = q + m + 1`.
    pub fn sliding_threshold(&self) -> f64 {
        let n = self.total_states();
        self.lambdas[n - 1] * self.lipschitz * self.sample_time.powi(n as i32)
    }
}

/// Filtering implicit robust exact differentiator.
///
/// The first variable `z_1` plays the role of a `q`-fold integrated
/// innovation and is driven to zero; the derivative estimates are linear
/// combinations of the variables `z_{q+2} .. z_{q+m+1}`. Because the update
/// inverts a longer implicit chain than the plain differentiator, every
/// step re-checks all implicit relations against the solved injection and
/// fails with [`StepError::ResidualCheckFailed`] if any of them is violated
/// beyond tolerance; relation 0 is the scalar injection equation, relations
/// 1 to `q + m + 1` the state rows.
#[derive(Debug, Clone)]
pub struct FilteringIred {
    config: FilteringConfig,
    coeffs: CoefficientTable,
    state: DifferentiatorState,
}

impl FilteringIred {
    /// Builds a differentiator with an all-zero initial state.
    pub fn new(config: FilteringConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let state = DifferentiatorState {
            z: vec![0.0; config.total_states()],
            k: 0,
        };
        let coeffs = compute_coefficients(config.m);
        Ok(Self {
            config,
            coeffs,
            state,
        })
    }

    pub fn config(&self) -> &FilteringConfig {
        &self.config
    }

    pub fn state(&self) -> &DifferentiatorState {
        &self.state
    }

    pub fn set_state(&mut self, state: DifferentiatorState) -> Result<(), ConfigError> {
        self.config.validate()?;
        if state.z.len() != self.config.total_states() {
            return Err(ConfigError::StateLength {
                expected: self.config.total_states(),
                got: state.z.len(),
            });
        }
        self.state = state;
        Ok(())
    }

    /// Consumes the sample `u` taken at time `k T` and returns derivative
    /// estimates for that time.
    pub fn step(&mut self, u: f64) -> Result<StepOutput, StepError> {
        let n = self.config.total_states();
        let (m, q) = (self.config.m, self.config.q);
        let t = self.config.sample_time;
        let big_l = self.config.lipschitz;
        let lambdas = &self.config.lambdas;
        let z_old = self.state.z.clone();

        let mut b = -t.powi(q as i32) * u;
        let mut tp = 1.0;
        for zi in &z_old {
            b += tp * zi;
            tp *= t;
        }

        let threshold = self.config.sliding_threshold();
        let sliding = b.abs() <= threshold;
        let z = &mut self.state.z;
        // v is the solved value of z_1', xi the selected sign element.
        let (rho_hat, v, xi, epsilon_bound) = if sliding {
            let xi = b / threshold;
            z[n - 1] -= b / t.powi(n as i32 - 1);
            (0.0, 0.0, xi, 0.0)
        } else {
            let rhs = b.abs() / (big_l * t.powi(n as i32));
            let r = solve_resolvent(&ResolventProblem {
                m: n - 1,
                lambdas,
                rhs,
                residual_tol: self.config.residual_tol,
            })?;
            let sgn = b.signum();
            z[n - 1] -= t * lambdas[n - 1] * big_l * sgn;
            (
                r * sgn,
                sgn * big_l * t.powi(n as i32) * r.powi(n as i32),
                sgn,
                self.config.residual_tol * big_l * t.powi(n as i32),
            )
        };

        for i in (1..n).rev() {
            let pow = (n - i) as i32;
            z[i - 1] += t * z[i] - lambdas[i - 1] * big_l * t.powi(pow + 1) * signed_powi(rho_hat, pow);
            if i == q {
                z[i - 1] -= t * u;
            }
        }

        self.check_residuals(&z_old, u, b, v, xi)?;

        let z = &self.state.z;
        let mut y = vec![0.0; m];
        for i in 1..=m {
            let mut acc = 0.0;
            let mut tp = 1.0;
            for j in i..=m {
                acc += tp * self.coeffs.as_f64(i, j) * z[q + j];
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

    /// Re-evaluates every implicit relation at the solved injection value,
    /// through the direct fractional-power expressions rather than the
    /// normalized ones used in the update.
    fn check_residuals(
        &self,
        z_old: &[f64],
        u: f64,
        b: f64,
        v: f64,
        xi: f64,
    ) -> Result<(), StepError> {
        let n = self.config.total_states();
        let q = self.config.q;
        let t = self.config.sample_time;
        let big_l = self.config.lipschitz;
        let lambdas = &self.config.lambdas;
        let z_new = &self.state.z;
        let base = self.config.residual_tol.max(1e-9);
        let nf = n as f64;

        let inj = |i: usize| -> f64 {
            // T lambda_i L^{i/n} |v|^{(n-i)/n} sign(v), the i-th row's
            // injection magnitude; for i = n the sign selection xi.
            if i == n {
                t * lambdas[n - 1] * big_l * xi
            } else {
                t * lambdas[i - 1]
                    * big_l.powf(i as f64 / nf)
                    * signed_power(v, (n - i) as f64 / nf)
            }
        };

        let mut eq = v - b + t.powi(n as i32 - 1) * inj(n);
        for i in 1..n {
            eq += t.powi(i as i32 - 1) * inj(i);
        }
        let tol = base * (big_l * t.powi(n as i32)).max(b.abs());
        if eq.abs() > tol {
            return Err(StepError::ResidualCheckFailed {
                relation: 0,
                residual: eq.abs(),
                tolerance: tol,
            });
        }

        for i in 1..=n {
            let mut res = z_new[i - 1] - z_old[i - 1] + inj(i);
            let mut scale = 1.0f64.max(z_new[i - 1].abs()).max(z_old[i - 1].abs()).max(inj(i).abs());
            if i < n {
                res -= t * z_new[i];
                scale = scale.max((t * z_new[i]).abs());
            }
            if i == q {
                res += t * u;
                scale = scale.max((t * u).abs());
            }
            let tol = base * scale;
            if res.abs() > tol {
                return Err(StepError::ResidualCheckFailed {
                    relation: i,
                    residual: res.abs(),
                    tolerance: tol,
                });
            }
        }
        Ok(())
    }
}

impl Differentiator for FilteringIred {
    fn step(&mut self, u: f64) -> Result<StepOutput, StepError> {
        FilteringIred::step(self, u)
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
