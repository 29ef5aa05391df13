//! Monte-Carlo error-rate evaluation of the denoiser+RDD pipeline against
//! the MFB on the raw received signal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoiser::{denoise, TrainedModel};
use crate::detector::{mfb, rdd_detect, run_error};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, Purpose};
use crate::sigmodel::{
    generate_examples, generate_scenario, hadamard_codes, ScenarioConfig, SpreadingMatrix,
    SymbolAlphabet,
};

/// Walsh–Hadamard codes of length S, truncated to the first N users.
pub fn scenario_codes(config: &ScenarioConfig) -> Result<SpreadingMatrix> {
    config.validate()?;
    let full = hadamard_codes(config.spreading_factor)?;
    if config.num_users == full.num_users() {
        return Ok(full);
    }
    let entries = (0..config.num_users)
        .flat_map(|i| full.column(i).iter().copied())
        .collect();
    SpreadingMatrix::from_columns(config.spreading_factor, config.num_users, entries)
}

/// Error counts from one batch of Monte-Carlo runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub num_runs: usize,
    /// `None` when no model was evaluated.
    pub errors_proposed: Option<usize>,
    pub errors_baseline: usize,
}

impl ErrorCounts {
    pub fn proposed_rate(&self) -> Option<f64> {
        self.errors_proposed.map(|e| e as f64 / self.num_runs as f64)
    }

    pub fn baseline_rate(&self) -> f64 {
        self.errors_baseline as f64 / self.num_runs as f64
    }

    pub fn proposed_half_width(&self) -> Option<f64> {
        self.errors_proposed.map(|e| binomial_half_width(e, self.num_runs))
    }

    pub fn baseline_half_width(&self) -> f64 {
        binomial_half_width(self.errors_baseline, self.num_runs)
    }
}

/// Normal-approximation 95% half-width of a binomial proportion.
pub fn binomial_half_width(errors: usize, runs: usize) -> f64 {
    if runs == 0 {
        return 0.0;
    }
    let p = errors as f64 / runs as f64;
    1.96 * (p * (1.0 - p) / runs as f64).sqrt()
}

fn check_model(model: &TrainedModel, config: &ScenarioConfig) -> Result<()> {
    if config.num_users != config.spreading_factor {
        return Err(Error::InvalidConfig(format!(
            "the denoiser needs num_users == spreading_factor, got N={} S={}",
            config.num_users, config.spreading_factor
        )));
    }
    if let Some(meta) = &model.meta {
        if meta.scenario.spreading_factor != config.spreading_factor {
            return Err(Error::shape(
                "model spreading factor",
                meta.scenario.spreading_factor,
                config.spreading_factor,
            ));
        }
    }
    Ok(())
}

/// Runs `num_runs` scenarios; run `i` uses the stream derived from
/// `(seed, i)`. The RDD is given the true number of active users.
pub fn evaluate(
    model: Option<&TrainedModel>,
    config: &ScenarioConfig,
    num_runs: usize,
    seed: u64,
) -> Result<ErrorCounts> {
    if num_runs == 0 {
        return Err(Error::InvalidConfig("num_runs must be at least 1".into()));
    }
    if let Some(m) = model {
        check_model(m, config)?;
    }
    let codes = scenario_codes(config)?;
    let alphabet = SymbolAlphabet::qpsk();
    let outcomes: Vec<(bool, bool)> = (0..num_runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_rng(seed, Purpose::Evaluation, i as u64);
            let scenario = generate_scenario(config, &codes, &alphabet, &mut rng)?;
            let k = scenario.active.len();
            let base = rdd_detect(&mfb(&codes, &scenario.received)?, k, &alphabet)?;
            let base_err = run_error(&base, &scenario.active);
            let prop_err = match model {
                Some(m) => {
                    let cleaned = denoise(m, &scenario.received, &codes)?;
                    let det = rdd_detect(&mfb(&codes, &cleaned)?, k, &alphabet)?;
                    run_error(&det, &scenario.active)
                }
                None => false,
            };
            Ok((prop_err, base_err))
        })
        .collect::<Result<_>>()?;
    Ok(ErrorCounts {
        num_runs,
        errors_proposed: model.map(|_| outcomes.iter().filter(|o| o.0).count()),
        errors_baseline: outcomes.iter().filter(|o| o.1).count(),
    })
}

pub fn evaluate_baseline(config: &ScenarioConfig, num_runs: usize, seed: u64) -> Result<ErrorCounts> {
    evaluate(None, config, num_runs, seed)
}

/// Mean of ‖ỹ−y‖²/‖r−y‖² over `count` held-out scenarios.
pub fn suppression_ratio(
    model: &TrainedModel,
    config: &ScenarioConfig,
    count: usize,
    seed: u64,
) -> Result<f64> {
    check_model(model, config)?;
    let codes = scenario_codes(config)?;
    let alphabet = SymbolAlphabet::qpsk();
    let examples = generate_examples(config, &codes, &alphabet, count, seed, Purpose::HeldOut)?;
    let ratios: Vec<f64> = examples
        .par_iter()
        .map(|ex| {
            let cleaned = denoise(model, &ex.received, &codes)?;
            let num: f64 = cleaned.iter().zip(&ex.clean).map(|(a, b)| (a - b).norm_sqr()).sum();
            let den: f64 = ex.received.iter().zip(&ex.clean).map(|(a, b)| (a - b).norm_sqr()).sum();
            Ok(if den > 0.0 { num / den } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}
