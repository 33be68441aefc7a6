//! Flat key-value scenario files.
//!
//! A scenario file consists of `key = value` lines, `#` comments, and the
//! optional sections `[signal]` and `[noise]`. Lists are comma-separated.
//! Keys outside the schema, duplicate keys, and malformed lines are rejected
//! with their line number, so typos fail loudly instead of silently falling
//! back to defaults.

use std::collections::BTreeMap;
use std::error::Error;
use std::fmt;
use std::fs;
use std::path::Path;

use ired::sim::{NoiseModel, SignalModel};
use ired::{ConfigError, DifferentiatorConfig, FilteringConfig};

const TOP_KEYS: &[&str] = &[
    "order",
    "lipschitz",
    "sample_time",
    "lambda",
    "residual_tol",
    "steps",
    "differentiator",
    "filter_order",
    "baseline",
    "coupling",
    "lambda_last",
    "a",
    "mu_bar",
];
const SIGNAL_KEYS: &[&str] = &["kind", "coeffs", "magnitude"];
const NOISE_KEYS: &[&str] = &["kind", "bound", "seed"];

/// Error reading or interpreting a scenario file.
#[derive(Debug)]
pub struct ScenarioError {
    /// 1-based line the error refers to, when it maps to one.
    pub line: Option<usize>,
    pub message: String,
}

impl ScenarioError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn new(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl Error for ScenarioError {}

impl From<ConfigError> for ScenarioError {
    fn from(e: ConfigError) -> Self {
        ScenarioError::new(e.to_string())
    }
}

/// Parsed scenario file.
#[derive(Debug, Clone)]
pub struct Scenario {
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ScenarioError::new(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut sections: BTreeMap<String, BTreeMap<String, (usize, String)>> = BTreeMap::new();
        let mut current = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if name != "signal" && name != "noise" {
                    return Err(ScenarioError::at(lineno, format!("unknown section [{name}]")));
                }
                current = name.to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ScenarioError::at(lineno, format!("expected `key = value`, got `{line}`")));
            };
            let key = key.trim();
            let value = value.trim();
            let allowed = match current.as_str() {
                "signal" => SIGNAL_KEYS,
                "noise" => NOISE_KEYS,
                _ => TOP_KEYS,
            };
            if !allowed.contains(&key) {
                let place = if current.is_empty() {
                    "at top level".to_string()
                } else {
                    format!("in [{current}]")
                };
                return Err(ScenarioError::at(lineno, format!("unknown key `{key}` {place}")));
            }
            let section = sections.entry(current.clone()).or_default();
            if let Some((first, _)) = section.get(key) {
                return Err(ScenarioError::at(
                    lineno,
                    format!("duplicate key `{key}` (first set on line {first})"),
                ));
            }
            section.insert(key.to_string(), (lineno, value.to_string()));
        }
        Ok(Scenario { sections })
    }

    fn raw(&self, section: &str, key: &str) -> Option<&(usize, String)> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    fn require(&self, section: &str, key: &str) -> Result<&(usize, String), ScenarioError> {
        self.raw(section, key).ok_or_else(|| {
            let place = if section.is_empty() {
                String::new()
            } else {
                format!(" in [{section}]")
            };
            ScenarioError::new(format!("missing key `{key}`{place}"))
        })
    }

    fn parse_one<T: std::str::FromStr>(
        (line, value): &(usize, String),
        key: &str,
        what: &str,
    ) -> Result<T, ScenarioError> {
        value
            .parse()
            .map_err(|_| ScenarioError::at(*line, format!("`{key}` must be {what}, got `{value}`")))
    }

    fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>, ScenarioError> {
        self.raw(section, key)
            .map(|r| Self::parse_one(r, key, "a number"))
            .transpose()
    }

    fn get_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ScenarioError> {
        let Some((line, value)) = self.raw(section, key) else {
            return Ok(None);
        };
        value
            .split(',')
            .map(|part| {
                part.trim().parse().map_err(|_| {
                    ScenarioError::at(
                        *line,
                        format!("`{key}` must be a comma-separated list of numbers, got `{value}`"),
                    )
                })
            })
            .collect::<Result<Vec<f64>, _>>()
            .map(Some)
    }

    pub fn order(&self) -> Result<usize, ScenarioError> {
        let r = self.require("", "order")?;
        Self::parse_one(r, "order", "a positive integer")
    }

    /// Number of steps to run, with the command-line flag taking precedence.
    pub fn steps(&self, flag: Option<usize>) -> Result<usize, ScenarioError> {
        if let Some(s) = flag {
            return Ok(s);
        }
        let r = self.require("", "steps")?;
        Self::parse_one(r, "steps", "a positive integer")
    }

    /// Which differentiator the scenario runs: `standard` (default) or
    /// `filtering`.
    pub fn differentiator_kind(&self) -> Result<&str, ScenarioError> {
        match self.raw("", "differentiator") {
            None => Ok("standard"),
            Some((line, value)) => match value.as_str() {
                "standard" | "filtering" => Ok(value),
                _ => Err(ScenarioError::at(
                    *line,
                    format!("`differentiator` must be standard or filtering, got `{value}`"),
                )),
            },
        }
    }

    pub fn differentiator_config(&self) -> Result<DifferentiatorConfig, ScenarioError> {
        let m = self.order()?;
        let lipschitz = Self::parse_one(self.require("", "lipschitz")?, "lipschitz", "a number")?;
        let sample_time =
            Self::parse_one(self.require("", "sample_time")?, "sample_time", "a number")?;
        let (line, _) = *self.require("", "lambda")?;
        let lambdas = self.get_list("", "lambda")?.unwrap();
        let residual_tol = self.get_f64("", "residual_tol")?.unwrap_or(0.0);
        DifferentiatorConfig::new(m, lipschitz, sample_time, lambdas, residual_tol)
            .map_err(|e| ScenarioError::at(line, e.to_string()))
    }

    pub fn filtering_config(&self) -> Result<FilteringConfig, ScenarioError> {
        let m = self.order()?;
        let q = Self::parse_one(
            self.require("", "filter_order")?,
            "filter_order",
            "a positive integer",
        )?;
        let lipschitz = Self::parse_one(self.require("", "lipschitz")?, "lipschitz", "a number")?;
        let sample_time =
            Self::parse_one(self.require("", "sample_time")?, "sample_time", "a number")?;
        let (line, _) = *self.require("", "lambda")?;
        let lambdas = self.get_list("", "lambda")?.unwrap();
        let residual_tol = self.get_f64("", "residual_tol")?.unwrap_or(0.0);
        FilteringConfig::new(m, q, lipschitz, sample_time, lambdas, residual_tol)
            .map_err(|e| ScenarioError::at(line, e.to_string()))
    }

    pub fn signal(&self) -> Result<SignalModel, ScenarioError> {
        let (line, kind) = self.require("signal", "kind")?;
        match kind.as_str() {
            "polynomial" => {
                let coeffs = self.get_list("signal", "coeffs")?.ok_or_else(|| {
                    ScenarioError::new("missing key `coeffs` in [signal] for a polynomial")
                })?;
                Ok(SignalModel::Polynomial { coeffs })
            }
            "sin_minus_cos_half" => Ok(SignalModel::SinMinusCosHalf),
            "worst_case_monomial" => {
                let magnitude = self.get_f64("signal", "magnitude")?.ok_or_else(|| {
                    ScenarioError::new("missing key `magnitude` in [signal] for a monomial")
                })?;
                Ok(SignalModel::MonomialWorstCase {
                    m: self.order()?,
                    magnitude,
                })
            }
            _ => Err(ScenarioError::at(
                *line,
                format!("unknown signal kind `{kind}`"),
            )),
        }
    }

    /// Noise model, with the command-line seed taking precedence over the
    /// file one. No `[noise]` section means noise-free.
    pub fn noise(&self, seed_flag: Option<u64>) -> Result<NoiseModel, ScenarioError> {
        let Some((line, kind)) = self.raw("noise", "kind") else {
            if self.sections.contains_key("noise") {
                return Err(ScenarioError::new("missing key `kind` in [noise]"));
            }
            return Ok(NoiseModel::None);
        };
        match kind.as_str() {
            "none" => Ok(NoiseModel::None),
            "uniform" => {
                let bound = self.get_f64("noise", "bound")?.ok_or_else(|| {
                    ScenarioError::new("missing key `bound` in [noise] for uniform noise")
                })?;
                let seed = match seed_flag {
                    Some(s) => s,
                    None => match self.raw("noise", "seed") {
                        Some(r) => Self::parse_one(r, "seed", "a non-negative integer")?,
                        None => 0,
                    },
                };
                Ok(NoiseModel::Uniform { bound, seed })
            }
            _ => Err(ScenarioError::at(
                *line,
                format!("unknown noise kind `{kind}`"),
            )),
        }
    }

    /// Baseline differentiator named by the scenario, for comparisons.
    pub fn baseline_kind(&self) -> Result<&str, ScenarioError> {
        let (line, value) = self.require("", "baseline")?;
        match value.as_str() {
            "hidd1" | "ihdd" | "istd" => Ok(value),
            _ => Err(ScenarioError::at(
                *line,
                format!("`baseline` must be hidd1, ihdd, or istd, got `{value}`"),
            )),
        }
    }

    pub fn coupling(&self) -> Result<f64, ScenarioError> {
        Ok(self.get_f64("", "coupling")?.unwrap_or(0.0))
    }

    pub fn lambda_last(&self) -> Result<f64, ScenarioError> {
        Self::parse_one(self.require("", "lambda_last")?, "lambda_last", "a number")
    }

    /// Homogeneity parameters for the tuning constants; defaults to 1.5 for
    /// every index.
    pub fn tuning_parameters(&self, m: usize) -> Result<Vec<f64>, ScenarioError> {
        Ok(self.get_list("", "a")?.unwrap_or_else(|| vec![1.5; m]))
    }

    pub fn mu_bar(&self) -> Result<Option<Vec<f64>>, ScenarioError> {
        self.get_list("", "mu_bar")
    }

    /// Sampling parameters without gains, for commands that generate the
    /// gains themselves.
    pub fn provisional_config(&self) -> Result<DifferentiatorConfig, ScenarioError> {
        let m = self.order()?;
        let lipschitz = Self::parse_one(self.require("", "lipschitz")?, "lipschitz", "a number")?;
        let sample_time =
            Self::parse_one(self.require("", "sample_time")?, "sample_time", "a number")?;
        let lambdas = match self.get_list("", "lambda")? {
            Some(l) => l,
            None => vec![2.0; m + 1],
        };
        let residual_tol = self.get_f64("", "residual_tol")?.unwrap_or(0.0);
        DifferentiatorConfig::new(m, lipschitz, sample_time, lambdas, residual_tol)
            .map_err(ScenarioError::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
# comment
order = 2
lipschitz = 1.5
sample_time = 0.1
lambda = 2.0, 2.12, 1.1
residual_tol = 1e-9
steps = 300

[signal]
kind = sin_minus_cos_half

[noise]
kind = uniform
bound = 1e-3
seed = 9
";

    #[test]
    fn parses_a_full_scenario() {
        let sc = Scenario::parse(GOOD).unwrap();
        let cfg = sc.differentiator_config().unwrap();
        assert_eq!(cfg.m, 2);
        assert_eq!(cfg.lambdas, vec![2.0, 2.12, 1.1]);
        assert_eq!(sc.steps(None).unwrap(), 300);
        assert_eq!(sc.steps(Some(7)).unwrap(), 7);
        assert_eq!(sc.signal().unwrap(), SignalModel::SinMinusCosHalf);
        assert_eq!(
            sc.noise(None).unwrap(),
            NoiseModel::Uniform {
                bound: 1e-3,
                seed: 9
            }
        );
        assert_eq!(
            sc.noise(Some(4)).unwrap(),
            NoiseModel::Uniform {
                bound: 1e-3,
                seed: 4
            }
        );
    }

    #[test]
    fn rejects_unknown_keys_with_line_numbers() {
        let err = Scenario::parse("order = 1\nbogus = 3\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("bogus"));

        let err = Scenario::parse("[signal]\nsteps = 3\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("in [signal]"));

        let err = Scenario::parse("[weather]\n").unwrap_err();
        assert_eq!(err.line, Some(1));
    }

    #[test]
    fn rejects_duplicates_and_malformed_lines() {
        let err = Scenario::parse("order = 1\norder = 2\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("first set on line 1"));

        let err = Scenario::parse("order\n").unwrap_err();
        assert_eq!(err.line, Some(1));
    }

    #[test]
    fn reports_missing_and_malformed_values() {
        let sc = Scenario::parse("order = 2\n").unwrap();
        let err = sc.differentiator_config().unwrap_err();
        assert!(err.message.contains("lipschitz"));

        let sc = Scenario::parse("order = two\n").unwrap();
        let err = sc.order().unwrap_err();
        assert_eq!(err.line, Some(1));

        let sc = Scenario::parse("lambda = 1.0, x\norder = 1\nlipschitz = 1\nsample_time = 0.1\n")
            .unwrap();
        let err = sc.differentiator_config().unwrap_err();
        assert_eq!(err.line, Some(1));
    }

    #[test]
    fn gain_validation_points_at_the_lambda_line() {
        let sc = Scenario::parse("order = 2\nlipschitz = 1\nsample_time = 0.1\nlambda = 1.0, 1.1\n")
            .unwrap();
        let err = sc.differentiator_config().unwrap_err();
        assert_eq!(err.line, Some(4));
        assert!(err.message.contains("gain"));
    }

    #[test]
    fn missing_noise_section_is_noise_free() {
        let sc = Scenario::parse("order = 1\n").unwrap();
        assert_eq!(sc.noise(None).unwrap(), NoiseModel::None);
    }
}
