//! Differentiator configuration, state, and per-step output types.

use std::error::Error;
use std::fmt;

/// Parameters of an order-`m` differentiator.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentiatorConfig {
    /// Differentiation order `m >= 1`; the observer carries `m + 1` states.
    pub m: usize,
    /// Lipschitz bound `L > 0` on the (m+1)-th derivative of the signal.
    pub lipschitz: f64,
    /// Sampling time `T > 0` in seconds.
    pub sample_time: f64,
    /// Observer gains `lambda_1 .. lambda_{m+1}`, all positive.
    pub lambdas: Vec<f64>,
    /// Residual tolerance `R >= 0` of the per-step polynomial solve.
    pub residual_tol: f64,
}

impl DifferentiatorConfig {
    /// Validates and builds a configuration.
    pub fn new(
        m: usize,
        lipschitz: f64,
        sample_time: f64,
        lambdas: Vec<f64>,
        residual_tol: f64,
    ) -> Result<Self, ConfigError> {
        let cfg = Self {
            m,
            lipschitz,
            sample_time,
            lambdas,
            residual_tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-checks all field invariants; useful after struct-literal
    /// construction or field edits.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.m < 1 {
            return Err(ConfigError::InvalidOrder);
        }
        if !(self.lipschitz > 0.0) || !self.lipschitz.is_finite() {
            return Err(ConfigError::NotPositive("lipschitz"));
        }
        if !(self.sample_time > 0.0) || !self.sample_time.is_finite() {
            return Err(ConfigError::NotPositive("sample_time"));
        }
        if self.lambdas.len() != self.m + 1 {
            return Err(ConfigError::LambdaCount {
                expected: self.m + 1,
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

    /// Sliding threshold `lambda_{m+1} L T^{m+1}` on the innovation.
    pub fn sliding_threshold(&self) -> f64 {
        self.lambdas[self.m] * self.lipschitz * self.sample_time.powi(self.m as i32 + 1)
    }
}

/// Observer state: the `m + 1` internal variables and a sample counter.
///
/// `z[i - 1]` carries the estimate denoted `z_i`, in units of the (i-1)-th
/// derivative. `k` is the index of the next sample to consume; a freshly
/// zero-initialized differentiator starts at `k = 0` and the sample consumed
/// at counter `k` is taken at time `k T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentiatorState {
    /// Internal variables `z_1 .. z_{m+1}`.
    pub z: Vec<f64>,
    /// Index of the next sample to consume.
    pub k: u64,
}

impl DifferentiatorState {
    /// All-zero state of dimension `m + 1` starting at sample 0.
    pub fn zero(m: usize) -> Self {
        Self {
            z: vec![0.0; m + 1],
            k: 0,
        }
    }
}

/// Result of advancing a differentiator by one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Derivative estimates `y_1 .. y_m` for the sample just consumed.
    pub y: Vec<f64>,
    /// Whether the step is in discrete-time sliding mode.
    pub sliding: bool,
    /// Selected value of the normalized injection `rho_hat`.
    pub rho_hat: f64,
    /// Innovation `b = u - sum_i T^{i-1} z_i` before the update.
    pub b: f64,
    /// Bound `R L T^{m+1}` on the input perturbation equivalent to the
    /// inexact polynomial solve; zero on sliding steps, where the update is
    /// exact.
    pub epsilon_bound: f64,
}

/// Configuration validation failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    /// Differentiation order was zero.
    InvalidOrder,
    /// A quantity that must be strictly positive and finite was not.
    NotPositive(&'static str),
    /// A quantity that must be nonnegative and finite was not.
    Negative(&'static str),
    /// Gain count does not match the order.
    LambdaCount { expected: usize, got: usize },
    /// State vector length does not match the order.
    StateLength { expected: usize, got: usize },
    /// A fixed-order differentiator kind was given a config of another order.
    OrderMismatch { expected: usize, got: usize },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::InvalidOrder => write!(f, "differentiation order must be at least 1"),
            ConfigError::NotPositive(name) => {
                write!(f, "{name} must be strictly positive and finite")
            }
            ConfigError::Negative(name) => write!(f, "{name} must be nonnegative and finite"),
            ConfigError::LambdaCount { expected, got } => {
                write!(f, "expected {expected} gains, got {got}")
            }
            ConfigError::StateLength { expected, got } => {
                write!(f, "expected state of length {expected}, got {got}")
            }
            ConfigError::OrderMismatch { expected, got } => {
                write!(f, "this differentiator kind has fixed order {expected}, got {got}")
            }
        }
    }
}

impl Error for ConfigError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_valid_config() {
        let cfg = DifferentiatorConfig::new(3, 2.0, 0.1, vec![3.0, 4.16, 3.06, 1.1], 5e-7);
        let cfg = cfg.unwrap();
        assert_eq!(cfg.m, 3);
        assert_eq!(cfg.lambdas.len(), 4);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(
            DifferentiatorConfig::new(0, 1.0, 0.1, vec![1.0], 0.0),
            Err(ConfigError::InvalidOrder)
        );
        assert_eq!(
            DifferentiatorConfig::new(1, -1.0, 0.1, vec![2.0, 1.1], 0.0),
            Err(ConfigError::NotPositive("lipschitz"))
        );
        assert_eq!(
            DifferentiatorConfig::new(1, 1.0, 0.1, vec![2.0], 0.0),
            Err(ConfigError::LambdaCount {
                expected: 2,
                got: 1
            })
        );
        assert_eq!(
            DifferentiatorConfig::new(1, 1.0, 0.1, vec![2.0, 0.0], 0.0),
            Err(ConfigError::NotPositive("lambdas"))
        );
        assert_eq!(
            DifferentiatorConfig::new(1, 1.0, 0.1, vec![2.0, 1.1], -1e-9),
            Err(ConfigError::Negative("residual_tol"))
        );
        assert_eq!(
            DifferentiatorConfig::new(1, f64::NAN, 0.1, vec![2.0, 1.1], 0.0),
            Err(ConfigError::NotPositive("lipschitz"))
        );
    }

    #[test]
    fn sliding_threshold_value() {
        let cfg = DifferentiatorConfig::new(1, 2.0, 0.5, vec![2.0, 1.5], 0.0).unwrap();
        assert_eq!(cfg.sliding_threshold(), 1.5 * 2.0 * 0.25);
    }

    #[test]
    fn zero_state_dimensions() {
        let st = DifferentiatorState::zero(3);
        assert_eq!(st.z, vec![0.0; 4]);
        assert_eq!(st.k, 0);
    }
}
