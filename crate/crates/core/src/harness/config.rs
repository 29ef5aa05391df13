//! Flat key/value experiment configuration (TOML syntax). Every key is
//! optional and unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sweep::{SweepSpec, SweepVariable};
use crate::denoiser::{AdamConfig, NetworkConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::sigmodel::{PowerReference, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    // scenario
    pub spreading_factor: usize,
    pub num_users: usize,
    pub num_active: usize,
    pub jammer_power_db: f64,
    pub jammer_enabled: bool,
    pub noise_power_db: f64,
    pub channel_mag_low: f64,
    pub channel_mag_high: f64,
    pub num_segments: usize,
    pub power_reference: PowerReference,
    pub seed: u64,
    // network
    pub depth: usize,
    pub hidden_filters: usize,
    pub kernel_rows: usize,
    pub kernel_cols: usize,
    // training
    pub num_examples: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    // evaluation and sweeps
    pub num_runs: usize,
    pub model_path: Option<PathBuf>,
    pub sweep_variable: Option<SweepVariable>,
    pub sweep_values: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl ExperimentConfig {
    /// Full-size operating point: S = N = 128, two active users, 20 dB
    /// jammer, −10 dB noise, D = 5 with 32 filters, 200k examples × 200
    /// epochs, 10,000 Monte-Carlo runs.
    pub fn paper() -> Self {
        let s = ScenarioConfig::default();
        let n = NetworkConfig::default();
        let t = TrainConfig::default();
        Self {
            spreading_factor: s.spreading_factor,
            num_users: s.num_users,
            num_active: s.num_active,
            jammer_power_db: s.jammer_power_db,
            jammer_enabled: s.jammer_enabled,
            noise_power_db: s.noise_power_db,
            channel_mag_low: s.channel_mag_low,
            channel_mag_high: s.channel_mag_high,
            num_segments: s.num_segments,
            power_reference: s.power_reference,
            seed: s.seed,
            depth: n.depth,
            hidden_filters: n.hidden_filters,
            kernel_rows: n.kernel_rows,
            kernel_cols: n.kernel_cols,
            num_examples: 200_000,
            batch_size: t.batch_size,
            epochs: t.epochs,
            learning_rate: t.adam.learning_rate,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            adam_epsilon: t.adam.epsilon,
            num_runs: 10_000,
            model_path: None,
            sweep_variable: None,
            sweep_values: Vec::new(),
        }
    }

    /// Same operating point and network, 20,000 examples × 30 epochs.
    pub fn desk() -> Self {
        Self {
            num_examples: 20_000,
            epochs: 30,
            num_runs: 2_000,
            ..Self::paper()
        }
    }

    /// S = N = 32 with 16 filters and the hop count scaled to 25 per period.
    /// Trains on 60,000 examples in batches of 32 for 20 epochs, about ten
    /// minutes on one core.
    pub fn fast() -> Self {
        Self {
            spreading_factor: 32,
            num_users: 32,
            num_segments: 25,
            hidden_filters: 16,
            num_examples: 60_000,
            batch_size: 32,
            epochs: 20,
            num_runs: 2_000,
            ..Self::paper()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            "fast" => Ok(Self::fast()),
            other => Err(Error::InvalidConfig(format!(
                "unknown preset {other:?} (expected paper, desk or fast)"
            ))),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Applies the keys of a TOML document on top of `self`.
    pub fn merged_with(&self, text: &str) -> Result<Self> {
        let overrides: toml::Table = toml::from_str(text)?;
        let mut base = toml::Table::try_from(self)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        base.extend(overrides);
        let cfg: Self = base
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario().validate()?;
        self.network().validate()?;
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig("batch_size must be at least 2".into()));
        }
        if self.num_runs == 0 {
            return Err(Error::InvalidConfig("num_runs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            spreading_factor: self.spreading_factor,
            num_users: self.num_users,
            num_active: self.num_active,
            jammer_power_db: self.jammer_power_db,
            jammer_enabled: self.jammer_enabled,
            noise_power_db: self.noise_power_db,
            channel_mag_low: self.channel_mag_low,
            channel_mag_high: self.channel_mag_high,
            num_segments: self.num_segments,
            power_reference: self.power_reference,
            seed: self.seed,
        }
    }

    pub fn network(&self) -> NetworkConfig {
        NetworkConfig {
            depth: self.depth,
            hidden_filters: self.hidden_filters,
            kernel_rows: self.kernel_rows,
            kernel_cols: self.kernel_cols,
        }
    }

    pub fn training(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.adam_epsilon,
            },
            seed: self.seed,
        }
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let variable = self.sweep_variable.ok_or_else(|| {
            Error::InvalidConfig("sweep_variable is required for a sweep".into())
        })?;
        let spec = SweepSpec {
            variable,
            values: self.sweep_values.clone(),
            base: self.scenario(),
            num_runs: self.num_runs,
            seed: self.seed,
            model_path: self.model_path.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}
