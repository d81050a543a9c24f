//! Run configuration for the command-line tool.
//!
//! A single TOML file can describe the trace source, the output paths and
//! one section per command. Unknown keys are rejected everywhere.
//!
//! ```toml
//! workers = 2
//!
//! [trace]
//! preset = "calibrated"
//! duration = 62500.0
//! seed = 7
//!
//! [output]
//! csv = "sweep.csv"
//! json = "sweep.json"
//!
//! [sweep]
//! n_list = [2, 10, 50]
//! policies = ["RR", "LWL"]
//! transforms = [{ kind = "strip_outliers", q = 0.999 }, { kind = "shuffle_iat" }]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{default_n_list, SweepPlan, TunePlan};
use crate::models::{PhiVariant, Policy};
use crate::sim::Granularity;
use crate::workload::{self, generate_synthetic, SynthSpec, Transform, WorkloadError, WorkloadTrace};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Upper bound on concurrent harness workers.
    pub workers: Option<usize>,
    pub trace: Option<TraceSource>,
    #[serde(default)]
    pub output: OutputConfig,
    pub simulate: Option<SimulateConfig>,
    pub model: Option<ModelConfig>,
    /// Used by both `sweep` and `spread`.
    pub sweep: Option<SweepPlan>,
    pub tune: Option<TunePlan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Calibrated,
    Monster,
    /// Poisson arrivals at `rate`, exponential demands with mean `mean_demand`.
    Markovian,
}

/// Where the trace comes from: exactly one of `path`, `preset` or
/// `synthetic`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSource {
    pub path: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub synthetic: Option<SynthSpec>,
    /// Seconds of synthetic arrivals for presets.
    pub duration: Option<f64>,
    pub seed: Option<u64>,
    pub rate: Option<f64>,
    pub mean_demand: Option<f64>,
    /// Restrict a loaded trace to one day window.
    pub day: Option<u32>,
}

impl TraceSource {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let set = [self.path.is_some(), self.preset.is_some(), self.synthetic.is_some()];
        if set.iter().filter(|&&b| b).count() != 1 {
            return Err(ConfigError::Invalid("[trace] needs exactly one of path, preset, synthetic".into()));
        }
        if self.preset.is_none() && (self.rate.is_some() || self.mean_demand.is_some() || self.duration.is_some()) {
            return Err(ConfigError::Invalid("duration, rate and mean_demand only apply to presets".into()));
        }
        if self.preset == Some(Preset::Markovian) && (self.rate.is_none() || self.mean_demand.is_none()) {
            return Err(ConfigError::Invalid("the markovian preset needs rate and mean_demand".into()));
        }
        Ok(())
    }

    /// The synthetic spec this source describes, if any.
    pub fn synth_spec(&self, default_seed: u64) -> Option<SynthSpec> {
        let seed = self.seed.unwrap_or(default_seed);
        if let Some(spec) = &self.synthetic {
            return Some(SynthSpec { seed: self.seed.unwrap_or(spec.seed), ..spec.clone() });
        }
        let duration = self.duration.unwrap_or(62_500.0);
        Some(match self.preset? {
            Preset::Calibrated => SynthSpec::calibrated(duration, seed),
            Preset::Monster => SynthSpec::monster(duration, seed),
            Preset::Markovian => {
                SynthSpec::markovian(self.rate.unwrap_or(1.0), self.mean_demand.unwrap_or(1.0), duration, seed)
            }
        })
    }

    pub fn load(&self, default_seed: u64) -> Result<WorkloadTrace, WorkloadError> {
        let trace = match (&self.path, self.synth_spec(default_seed)) {
            (Some(p), _) => workload::read_trace_file(p)?,
            (None, Some(spec)) => generate_synthetic(&spec)?,
            (None, None) => return Err(WorkloadError::InvalidParameter("no trace source".into())),
        };
        match self.day {
            Some(d) => workload::day_window(&trace, d),
            None => Ok(trace),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

fn default_rho0() -> f64 {
    0.8
}

/// One simulation run. Single-stage when `n` is set, two-stage when
/// `n1`, `n2` and one of `theta` / `theta_quantile` are set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: Option<u32>,
    pub n1: Option<u32>,
    pub n2: Option<u32>,
    pub theta: Option<f64>,
    pub theta_quantile: Option<f64>,
    #[serde(default = "default_policy")]
    pub policy: Policy,
    #[serde(default)]
    pub granularity: Option<Granularity>,
    /// Server rate; derived from the budget at `rho0` when absent.
    pub mu: Option<f64>,
    #[serde(default = "default_rho0")]
    pub rho0: f64,
    pub seed: Option<u64>,
    #[serde(default)]
    pub transforms: Vec<Transform>,
    #[serde(default)]
    pub transform_seed: u64,
}

fn default_policy() -> Policy {
    Policy::LWL
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            n: None,
            n1: None,
            n2: None,
            theta: None,
            theta_quantile: None,
            policy: default_policy(),
            granularity: None,
            mu: None,
            rho0: default_rho0(),
            seed: None,
            transforms: Vec::new(),
            transform_seed: 0,
        }
    }
}

impl SimulateConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let two = self.n1.is_some() || self.n2.is_some();
        match (self.n, two) {
            (Some(_), false) => {
                if self.theta.is_some() || self.theta_quantile.is_some() {
                    return Err(ConfigError::Invalid("theta only applies to two-stage runs".into()));
                }
            }
            (None, true) => {
                if self.n1.is_none() || self.n2.is_none() {
                    return Err(ConfigError::Invalid("two-stage runs need both n1 and n2".into()));
                }
                if self.theta.is_some() == self.theta_quantile.is_some() {
                    return Err(ConfigError::Invalid("two-stage runs need exactly one of theta, theta_quantile".into()));
                }
                if self.granularity == Some(Granularity::Job) {
                    return Err(ConfigError::Invalid("two-stage runs dispatch tasks".into()));
                }
            }
            _ => return Err(ConfigError::Invalid("[simulate] needs either n or n1 + n2".into())),
        }
        Ok(())
    }
}

/// Analytic curves from inline moments or from a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub lambda: Option<f64>,
    pub c_a: Option<f64>,
    pub mean_y: Option<f64>,
    pub c_y: Option<f64>,
    #[serde(default = "default_rho0")]
    pub rho0: f64,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<u32>,
    #[serde(default = "all_policies")]
    pub policies: Vec<Policy>,
    #[serde(default)]
    pub variant: PhiVariant,
}

fn all_policies() -> Vec<Policy> {
    Policy::ALL.to_vec()
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            lambda: None,
            c_a: None,
            mean_y: None,
            c_y: None,
            rho0: default_rho0(),
            n_list: default_n_list(),
            policies: all_policies(),
            variant: PhiVariant::Canonical,
        }
    }
}

impl ModelConfig {
    /// Inline moments, when all four are given.
    pub fn inline_moments(&self) -> Result<Option<[f64; 4]>, ConfigError> {
        match (self.lambda, self.c_a, self.mean_y, self.c_y) {
            (Some(l), Some(a), Some(y), Some(c)) => Ok(Some([l, a, y, c])),
            (None, None, None, None) => Ok(None),
            _ => Err(ConfigError::Invalid("[model] needs all of lambda, c_a, mean_y, c_y or none".into())),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        RunConfig::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(t) = &self.trace {
            t.validate()?;
        }
        if let Some(s) = &self.simulate {
            s.validate()?;
        }
        if let Some(m) = &self.model {
            m.inline_moments()?;
        }
        if self.workers == Some(0) {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        Ok(())
    }
}
