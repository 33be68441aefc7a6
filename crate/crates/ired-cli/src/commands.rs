//! Subcommand implementations.

use std::error::Error;
use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ired::coeffs::compute_coefficients;
use ired::differentiators::{Differentiator, StepError};
use ired::sim::{convergence_step, run, NoiseModel, RunRecord, SimError};
use ired::tuning::{
    check_gain_conditions, compute_constants, exactness_bound, noisy_bound, tune_gains,
    TuningError,
};
use ired::{DifferentiatorConfig, FilteringIred, Hidd1, IhddFamily, Ired, Istd};

use crate::config::{Scenario, ScenarioError};

/// Failure of a subcommand, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unusable scenario: unreadable file, bad key, invalid parameters.
    Scenario(ScenarioError),
    /// The tuning rule or its constants rejected the parameters.
    Tuning(TuningError),
    /// A differentiator step failed to solve its implicit relation.
    Step(StepError),
    /// Output could not be written.
    Output(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Scenario(_) => 3,
            CliError::Tuning(_) => 4,
            CliError::Step(_) => 5,
            CliError::Output(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Scenario(e) => write!(f, "scenario: {e}"),
            CliError::Tuning(e) => write!(f, "tuning: {e}"),
            CliError::Step(e) => write!(f, "step: {e}"),
            CliError::Output(e) => write!(f, "output: {e}"),
        }
    }
}

impl Error for CliError {}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Scenario(e)
    }
}

impl From<TuningError> for CliError {
    fn from(e: TuningError) -> Self {
        CliError::Tuning(e)
    }
}

impl From<StepError> for CliError {
    fn from(e: StepError) -> Self {
        CliError::Step(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Output(e)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Output(io::Error::other(e.to_string()))
    }
}

/// Output style for `run` and `compare`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Per-step table.
    Csv,
    /// `key = value` summary.
    Kv,
}

fn out_writer(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout()),
    })
}

/// Generates gains with the tuning rule and reports their margins.
pub fn tune(config: &Path) -> Result<(), CliError> {
    let scenario = Scenario::load(config)?;
    let m = scenario.order()?;
    let a = scenario.tuning_parameters(m)?;
    let lambda_last = scenario.lambda_last()?;
    let mu_bar = scenario.mu_bar()?;

    let provisional = scenario.provisional_config()?;
    let constants = compute_constants(m, &a, &provisional)?;
    let gains = tune_gains(&constants, lambda_last, mu_bar.as_deref())?;

    let tuned = DifferentiatorConfig::new(
        m,
        provisional.lipschitz,
        provisional.sample_time,
        gains.clone(),
        provisional.residual_tol,
    )
    .map_err(ScenarioError::from)?;
    let constants = compute_constants(m, &a, &tuned)?;
    let report = check_gain_conditions(&tuned, &constants)?;

    let gains_text: Vec<String> = gains.iter().map(|g| g.to_string()).collect();
    println!("lambda = {}", gains_text.join(", "));
    for (j, margin) in report.margins.iter().enumerate() {
        println!("margin_{j} = {margin}");
    }
    println!("satisfied = {}", report.satisfied);
    println!("noise_threshold = {}", constants.n_bar);
    Ok(())
}

/// Prints the worst-case accuracy bounds for the scenario's gains.
pub fn bounds(config: &Path, noise_flag: Option<f64>) -> Result<(), CliError> {
    let scenario = Scenario::load(config)?;
    let cfg = scenario.differentiator_config()?;
    let m = cfg.m;
    let coeffs = compute_coefficients(m);
    for i in 1..=m {
        println!(
            "exact_bound_{i} = {}",
            exactness_bound(i, m, cfg.lipschitz, cfg.sample_time, &coeffs)
        );
    }
    let noise = match noise_flag {
        Some(n) => n,
        None => match scenario.noise(None)? {
            NoiseModel::Uniform { bound, .. } => bound,
            NoiseModel::None => 0.0,
        },
    };
    if noise > 0.0 {
        let a = scenario.tuning_parameters(m)?;
        let constants = compute_constants(m, &a, &cfg)?;
        println!("noise = {noise}");
        for i in 1..=m {
            println!(
                "noisy_bound_{i} = {}",
                noisy_bound(i, &coeffs, &constants, &cfg, noise)
            );
        }
        println!("noise_threshold = {}", constants.n_bar);
    }
    Ok(())
}

fn error_bounds(
    scenario: &Scenario,
    cfg: &DifferentiatorConfig,
    noise: &NoiseModel,
) -> Result<Option<Vec<f64>>, CliError> {
    let coeffs = compute_coefficients(cfg.m);
    match noise {
        NoiseModel::None => Ok(Some(
            (1..=cfg.m)
                .map(|i| exactness_bound(i, cfg.m, cfg.lipschitz, cfg.sample_time, &coeffs))
                .collect(),
        )),
        NoiseModel::Uniform { bound, .. } => {
            let a = scenario.tuning_parameters(cfg.m)?;
            let constants = compute_constants(cfg.m, &a, cfg)?;
            Ok(Some(
                (1..=cfg.m)
                    .map(|i| noisy_bound(i, &coeffs, &constants, cfg, *bound))
                    .collect(),
            ))
        }
    }
}

fn kv_summary(record: &RunRecord, mut w: impl Write) -> Result<(), CliError> {
    writeln!(w, "steps = {}", record.rows.len())?;
    writeln!(w, "outputs = {}", record.outputs)?;
    writeln!(w, "sample_time = {}", record.sample_time)?;
    let sliding = record.rows.iter().filter(|r| r.sliding).count();
    writeln!(
        w,
        "sliding_fraction = {}",
        sliding as f64 / record.rows.len().max(1) as f64
    )?;
    writeln!(w, "tail_start = {}", record.tail_start())?;
    for (i, err) in record.tail_max_errors().iter().enumerate() {
        writeln!(w, "tail_max_err_{} = {}", i + 1, err)?;
    }
    if let Some(bounds) = &record.bounds {
        for (i, b) in bounds.iter().enumerate() {
            writeln!(w, "bound_{} = {}", i + 1, b)?;
        }
        match convergence_step(record, bounds) {
            Some(k) => writeln!(w, "convergence_step = {k}")?,
            None => writeln!(w, "convergence_step = none")?,
        }
    }
    Ok(())
}

/// Runs the scenario's differentiator and writes the trajectory or its
/// summary.
pub fn run_scenario(
    config: &Path,
    steps: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Format,
) -> Result<(), CliError> {
    let scenario = Scenario::load(config)?;
    let signal = scenario.signal()?;
    let noise = scenario.noise(seed)?;
    let steps = scenario.steps(steps)?;

    let record = match scenario.differentiator_kind()? {
        "filtering" => {
            let cfg = scenario.filtering_config()?;
            let mut d = FilteringIred::new(cfg).map_err(ScenarioError::from)?;
            run(&mut d, &signal, &noise, steps, None)?
        }
        _ => {
            let cfg = scenario.differentiator_config()?;
            let bounds = error_bounds(&scenario, &cfg, &noise)?;
            let mut d = Ired::new(cfg).map_err(ScenarioError::from)?;
            run(&mut d, &signal, &noise, steps, bounds)?
        }
    };

    let w = out_writer(&out)?;
    match format {
        Format::Csv => record.write_csv(w)?,
        Format::Kv => kv_summary(&record, w)?,
    }
    Ok(())
}

fn baseline_differentiator(
    scenario: &Scenario,
    cfg: &DifferentiatorConfig,
) -> Result<Box<dyn Differentiator>, CliError> {
    Ok(match scenario.baseline_kind()? {
        "hidd1" => Box::new(Hidd1::new(cfg.clone()).map_err(ScenarioError::from)?),
        "ihdd" => Box::new(
            IhddFamily::new(cfg.clone(), scenario.coupling()?).map_err(ScenarioError::from)?,
        ),
        _ => Box::new(Istd::new(cfg.clone()).map_err(ScenarioError::from)?),
    })
}

/// Largest jump between consecutive estimates over the evaluation tail, per
/// output: a direct measure of discretization chattering.
fn tail_max_jumps(record: &RunRecord) -> Vec<f64> {
    let start = record.tail_start().max(1);
    let mut worst = vec![0.0f64; record.outputs];
    for pair in record.rows[start - 1..].windows(2) {
        for (w, (a, b)) in worst.iter_mut().zip(pair[0].y.iter().zip(pair[1].y.iter())) {
            *w = w.max((b - a).abs());
        }
    }
    worst
}

fn compare_csv(main: &RunRecord, base: &RunRecord, mut w: impl Write) -> Result<(), CliError> {
    let mut header = vec!["k".to_string(), "t".to_string(), "u".to_string()];
    for i in 1..=main.outputs {
        header.push(format!("main_y{i}"));
    }
    for i in 1..=main.outputs {
        header.push(format!("main_err{i}"));
    }
    for i in 1..=base.outputs {
        header.push(format!("base_y{i}"));
    }
    for i in 1..=base.outputs {
        header.push(format!("base_err{i}"));
    }
    header.push("main_sliding".to_string());
    header.push("base_sliding".to_string());
    writeln!(w, "{}", header.join(","))?;
    for (a, b) in main.rows.iter().zip(base.rows.iter()) {
        let mut rec = vec![a.k.to_string(), a.t.to_string(), a.u.to_string()];
        rec.extend(a.y.iter().map(|v| v.to_string()));
        rec.extend(a.errors.iter().map(|v| v.to_string()));
        rec.extend(b.y.iter().map(|v| v.to_string()));
        rec.extend(b.errors.iter().map(|v| v.to_string()));
        rec.push(if a.sliding { "1" } else { "0" }.to_string());
        rec.push(if b.sliding { "1" } else { "0" }.to_string());
        writeln!(w, "{}", rec.join(","))?;
    }
    Ok(())
}

/// Runs the scenario's differentiator next to the named baseline on the
/// same samples.
pub fn compare(
    config: &Path,
    steps: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Format,
) -> Result<(), CliError> {
    let scenario = Scenario::load(config)?;
    let cfg = scenario.differentiator_config()?;
    let signal = scenario.signal()?;
    let noise = scenario.noise(seed)?;
    let steps = scenario.steps(steps)?;

    let mut main = Ired::new(cfg.clone()).map_err(ScenarioError::from)?;
    let main_record = run(&mut main, &signal, &noise, steps, None)?;
    let mut base = baseline_differentiator(&scenario, &cfg)?;
    let base_record = run(base.as_mut(), &signal, &noise, steps, None)?;

    let mut w = out_writer(&out)?;
    match format {
        Format::Csv => compare_csv(&main_record, &base_record, w)?,
        Format::Kv => {
            writeln!(w, "steps = {steps}")?;
            writeln!(w, "baseline = {}", scenario.baseline_kind()?)?;
            for (i, v) in main_record.tail_max_errors().iter().enumerate() {
                writeln!(w, "main_tail_max_err_{} = {}", i + 1, v)?;
            }
            for (i, v) in base_record.tail_max_errors().iter().enumerate() {
                writeln!(w, "base_tail_max_err_{} = {}", i + 1, v)?;
            }
            for (i, v) in tail_max_jumps(&main_record).iter().enumerate() {
                writeln!(w, "main_tail_max_jump_{} = {}", i + 1, v)?;
            }
            for (i, v) in tail_max_jumps(&base_record).iter().enumerate() {
                writeln!(w, "base_tail_max_jump_{} = {}", i + 1, v)?;
            }
        }
    }
    Ok(())
}
