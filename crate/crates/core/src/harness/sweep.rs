//! Parameter sweeps with a fixed model, and the CSV outputs.

use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::evaluate::{binomial_half_width, evaluate, ErrorCounts};
use crate::denoiser::TrainedModel;
use crate::error::{Error, Result};
use crate::sigmodel::ScenarioConfig;

pub const SWEEP_CSV_HEADER: [&str; 6] = [
    "swept_value",
    "proposed_error_rate",
    "baseline_error_rate",
    "num_runs",
    "errors_proposed",
    "errors_baseline",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    NoisePowerDb,
    JammerPowerDb,
    NumActive,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            Self::NoisePowerDb => "noise_power_db",
            Self::JammerPowerDb => "jammer_power_db",
            Self::NumActive => "num_active",
        }
    }

    /// `base` with this variable set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        match self {
            Self::NoisePowerDb => cfg.noise_power_db = value,
            Self::JammerPowerDb => cfg.jammer_power_db = value,
            Self::NumActive => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "num_active sweep values must be non-negative integers, got {value}"
                    )));
                }
                cfg.num_active = value as usize;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub base: ScenarioConfig,
    pub num_runs: usize,
    pub seed: u64,
    pub model_path: Option<PathBuf>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("sweep_values must not be empty".into()));
        }
        if self.num_runs == 0 {
            return Err(Error::InvalidConfig("num_runs must be at least 1".into()));
        }
        for &v in &self.values {
            self.variable.apply(&self.base, v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub swept_value: f64,
    pub counts: ErrorCounts,
}

impl SweepRow {
    /// True when the two 95% intervals are disjoint with the proposed one
    /// below.
    pub fn intervals_separated(&self) -> bool {
        match (self.counts.proposed_rate(), self.counts.proposed_half_width()) {
            (Some(p), Some(hp)) => {
                p + hp < self.counts.baseline_rate() - self.counts.baseline_half_width()
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub rows: Vec<SweepRow>,
}

/// One evaluation per swept value with the model held fixed. Every point
/// reuses the spec seed, so points differ only in the swept parameter.
pub fn sweep(spec: &SweepSpec, model: Option<&TrainedModel>) -> Result<SweepResult> {
    spec.validate()?;
    let rows = spec
        .values
        .iter()
        .map(|&v| {
            let cfg = spec.variable.apply(&spec.base, v)?;
            let counts = evaluate(model, &cfg, spec.num_runs, spec.seed)?;
            log::info!(
                "{}={v}: proposed {:?} baseline {}/{}",
                spec.variable.name(),
                counts.errors_proposed,
                counts.errors_baseline,
                counts.num_runs
            );
            Ok(SweepRow {
                swept_value: v,
                counts,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        variable: spec.variable,
        rows,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the sweep table. Proposed columns are empty for a baseline-only
/// sweep.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_CSV_HEADER)?;
    for row in &result.rows {
        let c = &row.counts;
        out.write_record([
            row.swept_value.to_string(),
            opt(c.proposed_rate()),
            c.baseline_rate().to_string(),
            c.num_runs.to_string(),
            opt(c.errors_proposed),
            c.errors_baseline.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Human-readable table with 95% half-widths.
pub fn format_sweep_table(result: &SweepResult) -> String {
    let mut s = format!(
        "{:>14}  {:>18}  {:>18}\n",
        result.variable.name(),
        "proposed ±95%",
        "baseline ±95%"
    );
    for row in &result.rows {
        let c = &row.counts;
        let prop = match (c.proposed_rate(), c.proposed_half_width()) {
            (Some(p), Some(h)) => format!("{p:.4} ± {h:.4}"),
            _ => "-".to_string(),
        };
        s.push_str(&format!(
            "{:>14}  {:>18}  {:>18}\n",
            row.swept_value,
            prop,
            format!("{:.4} ± {:.4}", c.baseline_rate(), c.baseline_half_width())
        ));
    }
    s
}

/// `epoch,mean_loss` log; epoch 0 is the untrained network.
pub fn write_loss_csv<W: Write>(initial_loss: f64, epoch_losses: &[f64], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "mean_loss"])?;
    out.write_record(["0".to_string(), initial_loss.to_string()])?;
    for (i, l) in epoch_losses.iter().enumerate() {
        out.write_record([(i + 1).to_string(), l.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Counts adjacent decreases in the baseline curve larger than twice the
/// combined binomial standard error.
pub fn significant_baseline_inversions(result: &SweepResult) -> (usize, usize) {
    let mut any = 0;
    let mut significant = 0;
    for pair in result.rows.windows(2) {
        let (a, b) = (&pair[0].counts, &pair[1].counts);
        let (pa, pb) = (a.baseline_rate(), b.baseline_rate());
        if pb < pa {
            any += 1;
            let se = ((binomial_half_width(a.errors_baseline, a.num_runs) / 1.96).powi(2)
                + (binomial_half_width(b.errors_baseline, b.num_runs) / 1.96).powi(2))
            .sqrt();
            if pa - pb > 2.0 * se {
                significant += 1;
            }
        }
    }
    (any, significant)
}
