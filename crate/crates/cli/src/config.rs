//! Run configuration files.
//!
//! A flat list of `key = value` lines. `#` starts a comment; blank lines are
//! ignored. Every key must be known and may appear once. Command-line flags
//! are applied afterwards and take precedence.

use std::path::Path;
use std::str::FromStr;

use scoredenoise_core::denoise::{DenoiseConfig, DenoiseMode, StepSchedule};
use scoredenoise_core::mesh::SamplingMethod;
use scoredenoise_core::network::NetworkConfig;
use scoredenoise_core::noise::NoiseModel;
use scoredenoise_core::training::{LossVariant, TrainConfig};

use crate::error::{CliError, FormatError, Result};
use crate::io::read_text;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub noise: NoiseModel,
    pub count: usize,
    pub sampling: SamplingMethod,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub train_patch_size: usize,
    pub train_coverage: f64,
    pub ensemble_k: usize,
    pub alpha1: f64,
    pub gamma: f64,
    pub steps: usize,
    pub patch_size: usize,
    pub coverage: f64,
    pub mode: DenoiseMode,
    pub upsample_rate: usize,
    pub upsample_sigma: f64,
}

impl Default for Settings {
    fn default() -> Self {
        let d = DenoiseConfig::default();
        Settings {
            seed: 0,
            noise: NoiseModel::gaussian(0.01),
            count: 10_000,
            sampling: SamplingMethod::PoissonDisk,
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            train_patch_size: 1000,
            train_coverage: 3.0,
            ensemble_k: d.ensemble_k,
            alpha1: d.schedule.alpha1(),
            gamma: d.schedule.gamma(),
            steps: d.schedule.steps(),
            patch_size: d.patch_size,
            coverage: d.coverage,
            mode: d.mode,
            upsample_rate: 4,
            upsample_sigma: 0.04,
        }
    }
}

pub const KEYS: &[&str] = &[
    "seed",
    "noise",
    "count",
    "sampling",
    "graph_k",
    "block_widths",
    "score_hidden",
    "iterations",
    "sigma_min",
    "sigma_max",
    "samples_per_anchor",
    "anchors_per_patch",
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "loss",
    "train_patch_size",
    "train_coverage",
    "ensemble_k",
    "alpha1",
    "gamma",
    "steps",
    "patch_size",
    "coverage",
    "mode",
    "upsample_rate",
    "upsample_sigma",
];

pub fn parse_loss(s: &str) -> Result<LossVariant, String> {
    match s {
        "neighborhood" => Ok(LossVariant::Neighborhood),
        "point-only" => Ok(LossVariant::PointOnly),
        _ => Err(format!("unknown loss `{s}` (expected neighborhood or point-only)")),
    }
}

pub fn loss_name(v: LossVariant) -> &'static str {
    match v {
        LossVariant::Neighborhood => "neighborhood",
        LossVariant::PointOnly => "point-only",
    }
}

pub fn parse_mode(s: &str) -> Result<DenoiseMode, String> {
    match s {
        "ascent" => Ok(DenoiseMode::GradientAscent),
        "direct" => Ok(DenoiseMode::DirectDisplacement),
        _ => Err(format!("unknown mode `{s}` (expected ascent or direct)")),
    }
}

pub fn parse_sampling(s: &str) -> Result<SamplingMethod, String> {
    match s {
        "poisson" => Ok(SamplingMethod::PoissonDisk),
        "uniform" => Ok(SamplingMethod::UniformArea),
        _ => Err(format!("unknown sampling `{s}` (expected poisson or uniform)")),
    }
}

pub fn parse_widths(s: &str) -> Result<Vec<usize>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("`{s}` is not a comma-separated list of integers")))
        .collect()
}

fn num<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("`{v}` is not a valid number"))
}

impl Settings {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "seed" => self.seed = num(value)?,
            "noise" => self.noise = value.parse().map_err(|e: scoredenoise_core::Error| e.to_string())?,
            "count" => self.count = num(value)?,
            "sampling" => self.sampling = parse_sampling(value)?,
            "graph_k" => self.network.graph_k = num(value)?,
            "block_widths" => self.network.block_widths = parse_widths(value)?,
            "score_hidden" => self.network.score_hidden = parse_widths(value)?,
            "iterations" => self.train.iterations = num(value)?,
            "sigma_min" => self.train.sigma_min = num(value)?,
            "sigma_max" => self.train.sigma_max = num(value)?,
            "samples_per_anchor" => self.train.samples_per_anchor = num(value)?,
            "anchors_per_patch" => self.train.anchors_per_patch = num(value)?,
            "learning_rate" => self.train.learning_rate = num(value)?,
            "beta1" => self.train.beta1 = num(value)?,
            "beta2" => self.train.beta2 = num(value)?,
            "epsilon" => self.train.epsilon = num(value)?,
            "loss" => self.train.loss = parse_loss(value)?,
            "train_patch_size" => self.train_patch_size = num(value)?,
            "train_coverage" => self.train_coverage = num(value)?,
            "ensemble_k" => self.ensemble_k = num(value)?,
            "alpha1" => self.alpha1 = num(value)?,
            "gamma" => self.gamma = num(value)?,
            "steps" => self.steps = num(value)?,
            "patch_size" => self.patch_size = num(value)?,
            "coverage" => self.coverage = num(value)?,
            "mode" => self.mode = parse_mode(value)?,
            "upsample_rate" => self.upsample_rate = num(value)?,
            "upsample_sigma" => self.upsample_sigma = num(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Applies a configuration file's text on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<(), FormatError> {
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| FormatError::new(i + 1, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(FormatError::new(i + 1, format!("`{key}` is set twice")));
            }
            seen.push(key);
            self.set(key, value).map_err(|m| FormatError::new(i + 1, m))?;
        }
        Ok(())
    }

    /// Defaults overlaid with `path`, if given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut s = Settings::default();
        if let Some(p) = path {
            s.apply_text(&read_text(p)?).map_err(|e| e.in_file(p))?;
        }
        Ok(s)
    }

    pub fn schedule(&self) -> Result<StepSchedule> {
        Ok(StepSchedule::new(self.alpha1, self.gamma, self.steps)?)
    }

    pub fn denoise_config(&self) -> Result<DenoiseConfig> {
        let cfg = DenoiseConfig {
            ensemble_k: self.ensemble_k,
            schedule: self.schedule()?,
            patch_size: self.patch_size,
            coverage: self.coverage,
            mode: self.mode,
        };
        cfg.validate().map_err(CliError::from)?;
        Ok(cfg)
    }
}
