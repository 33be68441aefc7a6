//! Sample-based differentiators advanced one measurement at a time.
//!
//! [`Ired`] is the main implicit robust exact differentiator of arbitrary
//! order and [`FilteringIred`] its filtering extension. [`Hidd1`],
//! [`IhddFamily`], and [`Istd`] are earlier implicit discretizations kept as
//! comparison baselines; the first two exhibit the chattering respectively
//! bias errors that the linear-combination outputs of the IRED remove.
//!
//! All differentiators consume samples `u_k` taken at time `k T`, starting
//! at the state's counter `k`, and emit estimates of the signal's
//! derivatives at the consumed sample time.

mod baselines;
mod filtering;
mod ired;

pub use baselines::{Hidd1, IhddFamily, Istd};
pub use filtering::{FilteringConfig, FilteringIred};
pub use ired::Ired;

use crate::coeffs::compute_coefficients;
use crate::config::{ConfigError, DifferentiatorConfig, DifferentiatorState, StepOutput};
use crate::resolvent::SolveError;
use std::error::Error;
use std::fmt;

/// Failure while advancing a differentiator by one step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepError {
    /// The per-step polynomial solve failed.
    Solver(SolveError),
    /// The updated state violates the implicit relations beyond tolerance;
    /// indicates an inconsistent solve rather than a bad input.
    ResidualCheckFailed {
        /// Index (1-based) of the violated relation.
        relation: usize,
        /// Magnitude of the violation.
        residual: f64,
        /// Tolerance it was checked against.
        tolerance: f64,
    },
}

impl fmt::Display for StepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepError::Solver(e) => write!(f, "{e}"),
            StepError::ResidualCheckFailed {
                relation,
                residual,
                tolerance,
            } => write!(
                f,
                "implicit relation {relation} violated after update: \
                 residual {residual:e} exceeds {tolerance:e}"
            ),
        }
    }
}

impl Error for StepError {}

impl From<SolveError> for StepError {
    fn from(e: SolveError) -> Self {
        StepError::Solver(e)
    }
}

/// Common stepping interface over all differentiator kinds.
pub trait Differentiator {
    /// Consumes the sample taken at time `k T` (current counter `k`) and
    /// returns the derivative estimates for that time.
    fn step(&mut self, u: f64) -> Result<StepOutput, StepError>;

    /// Number of derivative estimates per step.
    fn outputs(&self) -> usize;

    /// Flat copy of the internal state, for checkpointing and logging.
    fn state_vector(&self) -> Vec<f64>;

    /// Current sample counter.
    fn counter(&self) -> u64;

    /// Sampling time.
    fn sample_time(&self) -> f64;
}

/// Baseline differentiator of one of the comparison kinds.
#[derive(Debug, Clone)]
pub enum Baseline {
    /// First-order homogeneous implicit differentiator (chattering baseline).
    Hidd1(Hidd1),
    /// Second-order implicit differentiator family (bias baseline).
    IhddFamily(IhddFamily),
    /// Implicit super-twisting differentiator.
    Istd(Istd),
}

impl Differentiator for Baseline {
    fn step(&mut self, u: f64) -> Result<StepOutput, StepError> {
        match self {
            Baseline::Hidd1(d) => d.step(u),
            Baseline::IhddFamily(d) => d.step(u),
            Baseline::Istd(d) => d.step(u),
        }
    }

    fn outputs(&self) -> usize {
        match self {
            Baseline::Hidd1(d) => d.outputs(),
            Baseline::IhddFamily(d) => d.outputs(),
            Baseline::Istd(d) => d.outputs(),
        }
    }

    fn state_vector(&self) -> Vec<f64> {
        match self {
            Baseline::Hidd1(d) => d.state_vector(),
            Baseline::IhddFamily(d) => d.state_vector(),
            Baseline::Istd(d) => d.state_vector(),
        }
    }

    fn counter(&self) -> u64 {
        match self {
            Baseline::Hidd1(d) => d.counter(),
            Baseline::IhddFamily(d) => d.counter(),
            Baseline::Istd(d) => d.counter(),
        }
    }

    fn sample_time(&self) -> f64 {
        match self {
            Baseline::Hidd1(d) => d.sample_time(),
            Baseline::IhddFamily(d) => d.sample_time(),
            Baseline::Istd(d) => d.sample_time(),
        }
    }
}

/// Builds the state whose derivative estimates are exact for a signal with
/// the given value `f0` and derivatives `derivs = [f'(0), .., f^(m)(0)]` at
/// time zero.
///
/// The state solves the unit upper triangular system that equates the
/// differentiator's output combinations with the signal derivatives; the
/// returned counter is 1, meaning the first sample to consume is the one at
/// time `T`.
///
/// # Panics
///
/// Panics if `derivs.len() != config.m`.
pub fn init_from_derivatives(
    config: &DifferentiatorConfig,
    f0: f64,
    derivs: &[f64],
) -> DifferentiatorState {
    let m = config.m;
    assert_eq!(derivs.len(), m, "need exactly m derivatives");
    let t = config.sample_time;
    let coeffs = compute_coefficients(m);

    // Solve sum_{j=i..m} c(i,j) v_j = T^i f^(i)(0) for v_j = T^j z_{j+1} by
    // back substitution; the matrix is unit upper triangular.
    let mut v = vec![0.0; m + 1]; // v[j] for j = 1..=m
    for i in (1..=m).rev() {
        let mut acc = t.powi(i as i32) * derivs[i - 1];
        for j in (i + 1)..=m {
            acc -= coeffs.as_f64(i, j) * v[j];
        }
        v[i] = acc;
    }

    let mut z = vec![0.0; m + 1];
    z[0] = f0;
    for j in 1..=m {
        z[j] = v[j] / t.powi(j as i32);
    }
    DifferentiatorState { z, k: 1 }
}

pub(crate) fn validate_instance(
    config: &DifferentiatorConfig,
    state: &DifferentiatorState,
) -> Result<(), ConfigError> {
    config.validate()?;
    if state.z.len() != config.m + 1 {
        return Err(ConfigError::StateLength {
            expected: config.m + 1,
            got: state.z.len(),
        });
    }
    Ok(())
}
