//! Simulation support: test signals, measurement noise, and recorded runs.

use crate::differentiators::{Differentiator, StepError};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::error::Error;
use std::fmt;
use std::io::{Read, Write};

/// Differentiable test signal with closed-form derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalModel {
    /// Polynomial with the given coefficients of `t^j`, ascending in `j`.
    Polynomial { coeffs: Vec<f64> },
    /// `sin t - cos(t/2)`, the classic benchmark signal; its derivative of
    /// order `m + 1` is bounded by `1 + 2^-(m+1)`.
    SinMinusCosHalf,
    /// `M t^{m+1} / (m+1)!`, the signal attaining the worst-case accuracy
    /// of an order-`m` differentiator with Lipschitz bound `M`.
    MonomialWorstCase { m: usize, magnitude: f64 },
}

impl SignalModel {
    /// Derivative of the given order at time `t` (order 0 is the value).
    pub fn eval(&self, t: f64, order: usize) -> f64 {
        match self {
            SignalModel::Polynomial { coeffs } => {
                let mut acc = 0.0;
                let mut tp = 1.0;
                for (j, a) in coeffs.iter().enumerate().skip(order) {
                    acc += falling_factorial(j, order) * a * tp;
                    tp *= t;
                }
                acc
            }
            SignalModel::SinMinusCosHalf => {
                let (s, c) = quarter_turns(order);
                // d^o sin t = sin(t + o pi/2); d^o cos(t/2) picks up 2^-o.
                (s * t.sin() + c * t.cos())
                    - 0.5f64.powi(order as i32) * (s * (t / 2.0).cos() - c * (t / 2.0).sin())
            }
            SignalModel::MonomialWorstCase { m, magnitude } => {
                if order > m + 1 {
                    0.0
                } else {
                    let p = m + 1 - order;
                    magnitude * t.powi(p as i32) / factorial(p)
                }
            }
        }
    }

    /// Value of the signal extended to negative times by its Taylor
    /// polynomial of order `order_limit` at zero.
    pub fn extended(&self, t: f64, order_limit: usize) -> f64 {
        if t >= 0.0 {
            return self.eval(t, 0);
        }
        let mut acc = 0.0;
        let mut tp = 1.0;
        for j in 0..=order_limit {
            acc += self.eval(0.0, j) * tp / factorial(j);
            tp *= t;
        }
        acc
    }

    /// Bound on the derivative of order `m + 1` over `[0, horizon]`.
    ///
    /// Closed form where available, otherwise a dense-grid supremum.
    pub fn lipschitz_bound(&self, m: usize, horizon: f64) -> f64 {
        match self {
            SignalModel::SinMinusCosHalf => 1.0 + 0.5f64.powi(m as i32 + 1),
            SignalModel::MonomialWorstCase { m: mm, magnitude } if *mm == m => *magnitude,
            _ => {
                let samples = 4096;
                (0..=samples)
                    .map(|i| {
                        self.eval(horizon * i as f64 / samples as f64, m + 1)
                            .abs()
                    })
                    .fold(0.0, f64::max)
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

fn falling_factorial(j: usize, order: usize) -> f64 {
    (j - order + 1..=j).map(|v| v as f64).product()
}

/// Coefficients (sin, cos) of the o-th derivative of sin.
fn quarter_turns(order: usize) -> (f64, f64) {
    match order % 4 {
        0 => (1.0, 0.0),
        1 => (0.0, 1.0),
        2 => (-1.0, 0.0),
        _ => (0.0, -1.0),
    }
}

/// Measurement noise model.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Noise-free measurements.
    None,
    /// Uniform noise on `[-bound, bound]` from a seeded generator; runs
    /// with the same seed are bit-identical.
    Uniform { bound: f64, seed: u64 },
}

impl NoiseModel {
    pub fn sampler(&self) -> NoiseSampler {
        match self {
            NoiseModel::None => NoiseSampler { inner: None },
            NoiseModel::Uniform { bound, seed } => NoiseSampler {
                inner: Some((ChaCha12Rng::seed_from_u64(*seed), *bound)),
            },
        }
    }
}

/// Stateful noise sequence drawn from a [`NoiseModel`].
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    inner: Option<(ChaCha12Rng, f64)>,
}

impl NoiseSampler {
    /// Next noise sample.
    pub fn next_sample(&mut self) -> f64 {
        match &mut self.inner {
            None => 0.0,
            Some((rng, bound)) => {
                // Top 53 bits to a uniform in [0, 1), then to [-bound, bound].
                let u = (rng.next_u64() >> 11) as f64 * 2f64.powi(-53);
                *bound * (2.0 * u - 1.0)
            }
        }
    }
}

/// One recorded step of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    /// Sample index.
    pub k: u64,
    /// Sample time `k T`.
    pub t: f64,
    /// Measured sample fed to the differentiator.
    pub u: f64,
    /// Derivative estimates.
    pub y: Vec<f64>,
    /// True derivatives of the signal at `t`.
    pub reference: Vec<f64>,
    /// Estimation errors `y - reference`.
    pub errors: Vec<f64>,
    /// Whether the step was in sliding mode.
    pub sliding: bool,
}

/// Recorded differentiator run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// Number of derivative estimates per step.
    pub outputs: usize,
    /// Sampling time.
    pub sample_time: f64,
    /// Worst-case error bounds per output, when supplied to [`run`].
    pub bounds: Option<Vec<f64>>,
    /// Recorded steps.
    pub rows: Vec<RunRow>,
}

/// Failure reading a recorded run.
#[derive(Debug)]
pub enum SimError {
    Csv(csv::Error),
    Parse { line: usize, message: String },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Csv(e) => write!(f, "{e}"),
            SimError::Parse { line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

impl Error for SimError {}

impl From<csv::Error> for SimError {
    fn from(e: csv::Error) -> Self {
        SimError::Csv(e)
    }
}

impl RunRecord {
    /// Start index of the evaluation tail: the final quarter of the rows,
    /// but at least 50 of them.
    pub fn tail_start(&self) -> usize {
        tail_start(self.rows.len())
    }

    /// Largest absolute error per output over the evaluation tail.
    pub fn tail_max_errors(&self) -> Vec<f64> {
        let mut worst = vec![0.0f64; self.outputs];
        for row in &self.rows[self.tail_start()..] {
            for (w, e) in worst.iter_mut().zip(row.errors.iter()) {
                *w = w.max(e.abs());
            }
        }
        worst
    }

    /// Writes the run as CSV with one line per step.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SimError> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["k".to_string(), "t".to_string(), "u".to_string()];
        for i in 1..=self.outputs {
            header.push(format!("y{i}"));
        }
        for i in 1..=self.outputs {
            header.push(format!("ref{i}"));
        }
        for i in 1..=self.outputs {
            header.push(format!("err{i}"));
        }
        header.push("sliding".to_string());
        out.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.k.to_string(), row.t.to_string(), row.u.to_string()];
            rec.extend(row.y.iter().map(|v| v.to_string()));
            rec.extend(row.reference.iter().map(|v| v.to_string()));
            rec.extend(row.errors.iter().map(|v| v.to_string()));
            rec.push(if row.sliding { "1" } else { "0" }.to_string());
            out.write_record(&rec)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a run written by [`write_csv`]. The sampling time is inferred
    /// from the time column; bounds are not stored in the file.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SimError> {
        let mut rd = csv::Reader::from_reader(reader);
        let header = rd.headers()?.clone();
        let outputs = header.iter().filter(|h| h.starts_with('y')).count();
        let expect = 3 + 3 * outputs + 1;
        if header.len() != expect {
            return Err(SimError::Parse {
                line: 1,
                message: format!("expected {expect} columns, got {}", header.len()),
            });
        }
        let mut rows = Vec::new();
        for (idx, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = idx + 2;
            let field = |col: usize| -> Result<f64, SimError> {
                rec.get(col)
                    .ok_or(())
                    .and_then(|s| s.parse::<f64>().map_err(|_| ()))
                    .map_err(|_| SimError::Parse {
                        line,
                        message: format!("bad numeric field in column {col}"),
                    })
            };
            let k = rec
                .get(0)
                .and_then(|s| s.parse::<u64>().ok())
                .ok_or(SimError::Parse {
                    line,
                    message: "bad sample index".to_string(),
                })?;
            let mut y = Vec::with_capacity(outputs);
            let mut reference = Vec::with_capacity(outputs);
            let mut errors = Vec::with_capacity(outputs);
            for i in 0..outputs {
                y.push(field(3 + i)?);
                reference.push(field(3 + outputs + i)?);
                errors.push(field(3 + 2 * outputs + i)?);
            }
            let sliding = match rec.get(3 + 3 * outputs) {
                Some("1") => true,
                Some("0") => false,
                _ => {
                    return Err(SimError::Parse {
                        line,
                        message: "bad sliding flag".to_string(),
                    })
                }
            };
            rows.push(RunRow {
                k,
                t: field(1)?,
                u: field(2)?,
                y,
                reference,
                errors,
                sliding,
            });
        }
        let sample_time = match rows.len() {
            0 => 0.0,
            1 => rows[0].t,
            _ => rows[1].t - rows[0].t,
        };
        Ok(RunRecord {
            outputs,
            sample_time,
            bounds: None,
            rows,
        })
    }
}

fn tail_start(len: usize) -> usize {
    len.saturating_sub((len / 4).max(50))
}

/// Runs a differentiator on noisy samples of a signal for `steps` steps,
/// starting at the differentiator's current counter.
pub fn run<D: Differentiator + ?Sized>(
    diff: &mut D,
    signal: &SignalModel,
    noise: &NoiseModel,
    steps: usize,
    bounds: Option<Vec<f64>>,
) -> Result<RunRecord, StepError> {
    let outputs = diff.outputs();
    let sample_time = diff.sample_time();
    let mut sampler = noise.sampler();
    let mut rows = Vec::with_capacity(steps);
    for _ in 0..steps {
        let k = diff.counter();
        let t = k as f64 * sample_time;
        let u = signal.eval(t, 0) + sampler.next_sample();
        let out = diff.step(u)?;
        let reference: Vec<f64> = (1..=outputs).map(|i| signal.eval(t, i)).collect();
        let errors: Vec<f64> = out
            .y
            .iter()
            .zip(reference.iter())
            .map(|(a, b)| a - b)
            .collect();
        rows.push(RunRow {
            k,
            t,
            u,
            y: out.y,
            reference,
            errors,
            sliding: out.sliding,
        });
    }
    Ok(RunRecord {
        outputs,
        sample_time,
        bounds,
        rows,
    })
}

/// First row index from which every error stays within the per-output
/// bounds through the end of the run; `None` if the final row violates
/// them or the record is empty.
pub fn convergence_step(record: &RunRecord, bounds: &[f64]) -> Option<usize> {
    assert_eq!(bounds.len(), record.outputs, "one bound per output");
    if record.rows.is_empty() {
        return None;
    }
    let mut idx = record.rows.len();
    for (i, row) in record.rows.iter().enumerate().rev() {
        let ok = row
            .errors
            .iter()
            .zip(bounds.iter())
            .all(|(e, b)| e.abs() <= *b);
        if !ok {
            break;
        }
        idx = i;
    }
    if idx == record.rows.len() {
        None
    } else {
        Some(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DifferentiatorConfig;
    use crate::differentiators::Ired;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_derivatives() {
        let p = SignalModel::Polynomial {
            coeffs: vec![1.0, 2.0, 3.0, -0.5],
        };
        assert_relative_eq!(p.eval(0.7, 0), 1.0 + 1.4 + 3.0 * 0.49 - 0.5 * 0.343);
        assert_relative_eq!(p.eval(0.7, 1), 2.0 + 6.0 * 0.7 - 1.5 * 0.49);
        assert_relative_eq!(p.eval(0.7, 2), 6.0 - 3.0 * 0.7);
        assert_relative_eq!(p.eval(0.7, 3), -3.0);
        assert_eq!(p.eval(0.7, 4), 0.0);
    }

    #[test]
    fn benchmark_signal_derivatives() {
        let s = SignalModel::SinMinusCosHalf;
        let t = 0.3;
        assert_relative_eq!(s.eval(t, 0), t.sin() - (t / 2.0).cos(), max_relative = 1e-15);
        assert_relative_eq!(
            s.eval(t, 1),
            t.cos() + 0.5 * (t / 2.0).sin(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            s.eval(t, 4),
            t.sin() - 0.0625 * (t / 2.0).cos(),
            max_relative = 1e-13
        );
        assert_relative_eq!(s.lipschitz_bound(3, 10.0), 17.0 / 16.0);
    }

    #[test]
    fn worst_case_monomial() {
        let w = SignalModel::MonomialWorstCase {
            m: 2,
            magnitude: 4.0,
        };
        assert_relative_eq!(w.eval(0.5, 0), 4.0 * 0.125 / 6.0);
        assert_eq!(w.eval(0.5, 3), 4.0);
        assert_eq!(w.eval(0.5, 4), 0.0);
        assert_eq!(w.lipschitz_bound(2, 100.0), 4.0);
    }

    #[test]
    fn taylor_extension_reproduces_polynomials() {
        let p = SignalModel::Polynomial {
            coeffs: vec![1.0, -2.0, 0.5],
        };
        for t in [-0.7, -0.1, 0.0, 0.4] {
            assert_relative_eq!(p.extended(t, 2), p.eval(t, 0), max_relative = 1e-14);
        }
        // Truncation below the degree changes negative times only.
        assert_relative_eq!(p.extended(-1.0, 1), 1.0 + 2.0, max_relative = 1e-14);
        assert_relative_eq!(p.extended(1.0, 1), p.eval(1.0, 0), max_relative = 1e-14);
    }

    #[test]
    fn uniform_noise_is_deterministic_and_bounded() {
        let model = NoiseModel::Uniform {
            bound: 0.1,
            seed: 7,
        };
        let mut a = model.sampler();
        let mut b = model.sampler();
        let mut seen_large = false;
        for _ in 0..1000 {
            let va = a.next_sample();
            assert_eq!(va, b.next_sample());
            assert!(va.abs() <= 0.1);
            seen_large |= va.abs() > 0.05;
        }
        assert!(seen_large);
        let mut c = NoiseModel::Uniform {
            bound: 0.1,
            seed: 8,
        }
        .sampler();
        assert_ne!(a.next_sample(), c.next_sample());
        assert_eq!(NoiseModel::None.sampler().next_sample(), 0.0);
    }

    fn small_run() -> RunRecord {
        let cfg = DifferentiatorConfig::new(1, 2.0, 0.1, vec![3.2, 1.2], 0.0).unwrap();
        let mut d = Ired::new(cfg).unwrap();
        let signal = SignalModel::Polynomial {
            coeffs: vec![0.0, 1.0, 0.3],
        };
        let noise = NoiseModel::Uniform {
            bound: 1e-3,
            seed: 42,
        };
        run(&mut d, &signal, &noise, 120, Some(vec![0.5])).unwrap()
    }

    #[test]
    fn csv_round_trips_exactly() {
        let record = small_run();
        let mut buf = Vec::new();
        record.write_csv(&mut buf).unwrap();
        let back = RunRecord::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows, record.rows);
        assert_eq!(back.outputs, record.outputs);
        assert_eq!(back.sample_time, record.sample_time);
        let mut again = Vec::new();
        back.write_csv(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn run_rows_are_consistent() {
        let record = small_run();
        assert_eq!(record.rows.len(), 120);
        for (i, row) in record.rows.iter().enumerate() {
            assert_eq!(row.k, i as u64);
            assert_relative_eq!(row.t, i as f64 * 0.1);
            for j in 0..record.outputs {
                assert_eq!(row.errors[j], row.y[j] - row.reference[j]);
            }
        }
        assert_eq!(record.bounds, Some(vec![0.5]));
    }

    #[test]
    fn convergence_detection() {
        let mut record = small_run();
        // Parabola with derivative bound satisfied only after the start.
        let idx = convergence_step(&record, &[0.05]);
        let idx = idx.expect("run should settle");
        assert!(idx > 0);
        for row in &record.rows[idx..] {
            assert!(row.errors[0].abs() <= 0.05);
        }
        assert!(row_violates(&record.rows[idx - 1], 0.05));
        // A bound nothing satisfies at the end.
        let worst = record.rows.last().unwrap().errors[0].abs();
        assert_eq!(convergence_step(&record, &[worst * 0.9]), None);
        record.rows.clear();
        assert_eq!(convergence_step(&record, &[1.0]), None);
    }

    fn row_violates(row: &RunRow, bound: f64) -> bool {
        row.errors[0].abs() > bound
    }

    #[test]
    fn tail_window_sizes() {
        assert_eq!(tail_start(1000), 750);
        assert_eq!(tail_start(100), 50);
        assert_eq!(tail_start(30), 0);
        assert_eq!(tail_start(0), 0);
    }
}
