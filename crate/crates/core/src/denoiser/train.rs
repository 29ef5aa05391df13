use log::{debug, info};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::input::{build_input_tensor, target_tensor};
use super::model::{TrainedModel, TrainingMeta};
use super::network::{
    example_losses, loss_gradient, network_backward, network_forward, Mode, NetworkConfig,
    NetworkWeights,
};
use super::tensor::Tensor3;
use crate::error::{Error, Result};
use crate::rng::{derive_rng, Purpose};
use crate::sigmodel::{Example, ScenarioConfig, SpreadingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    /// Seeds weight initialization and the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            epochs: 200,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// A network-ready (input, target) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedExample {
    pub input: Tensor3<f32>,
    pub target: Tensor3<f32>,
}

pub fn prepare_examples(examples: &[Example], codes: &SpreadingMatrix) -> Result<Vec<PreparedExample>> {
    examples
        .par_iter()
        .map(|e| {
            let x = build_input_tensor::<f32>(&e.received, codes)?;
            Ok(PreparedExample {
                target: target_tensor(&e.clean, x.scale_received),
                input: x.tensor,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
}

fn gather(data: &[PreparedExample], idx: &[usize]) -> (Vec<Tensor3<f32>>, Vec<Tensor3<f32>>) {
    idx.iter()
        .map(|&i| (data[i].input.clone(), data[i].target.clone()))
        .unzip()
}

/// Mean per-example training-mode loss of `weights` over `data`, in dataset
/// order and without touching the running statistics.
pub fn mean_batch_loss(
    data: &[PreparedExample],
    weights: &NetworkWeights<f32>,
    config: &NetworkConfig,
    batch_size: usize,
) -> Result<f64> {
    let order: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in order.chunks(batch_size).filter(|c| c.len() >= 2) {
        let (x, t) = gather(data, chunk);
        let (y, _) = network_forward(&x, weights, config, Mode::Training)?;
        total += example_losses(&y, &t)?.iter().sum::<f64>();
        count += chunk.len();
    }
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(total / count as f64)
}

/// Mini-batch ADAM on the summed squared error. Calls `observer` after every
/// epoch.
pub fn train_prepared(
    data: &[PreparedExample],
    net: &NetworkConfig,
    cfg: &TrainConfig,
    mut observer: impl FnMut(EpochStats),
) -> Result<(NetworkWeights<f32>, f64, Vec<f64>)> {
    net.validate()?;
    if data.len() < 2 {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch_size < 2 {
        return Err(Error::InvalidConfig("batch_size must be at least 2".into()));
    }
    let mut weights = NetworkWeights::<f32>::init(net, &mut derive_rng(cfg.seed, Purpose::Init, 0));
    let initial = mean_batch_loss(data, &weights, net, cfg.batch_size)?;
    info!("untrained mean loss {initial:.6}");
    let mut adam = AdamState::new(&weights, cfg.adam);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut derive_rng(cfg.seed, Purpose::Shuffle, epoch as u64));
        let mut total = 0.0;
        let mut count = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            // A lone trailing example cannot form batch statistics.
            if chunk.len() < 2 {
                continue;
            }
            let (x, t) = gather(data, chunk);
            let (y, cache) = network_forward(&x, &weights, net, Mode::Training)?;
            let batch_loss: f64 = example_losses(&y, &t)?.iter().sum();
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            let grads = network_backward(&cache, &weights, &loss_gradient(&y, &t)?)?;
            weights.update_running_stats(&cache)?;
            adam_step(&mut weights, &grads, &mut adam)?;
            total += batch_loss;
            count += chunk.len();
        }
        let mean_loss = total / count as f64;
        debug!("epoch {epoch}: {count} examples");
        info!("epoch {epoch}/{} mean loss {mean_loss:.6}", cfg.epochs);
        losses.push(mean_loss);
        observer(EpochStats { epoch, mean_loss });
    }
    Ok((weights, initial, losses))
}

/// Prepares `dataset`, trains, and packages the result with its metadata.
pub fn train(
    dataset: &[Example],
    codes: &SpreadingMatrix,
    scenario: &ScenarioConfig,
    net: &NetworkConfig,
    cfg: &TrainConfig,
    observer: impl FnMut(EpochStats),
) -> Result<TrainedModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let data = prepare_examples(dataset, codes)?;
    let (weights, initial_loss, epoch_losses) = train_prepared(&data, net, cfg, observer)?;
    let mut model = TrainedModel::new(*net, weights)?;
    model.meta = Some(TrainingMeta {
        scenario: scenario.clone(),
        num_examples: dataset.len(),
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        initial_loss,
        final_loss: epoch_losses.last().copied().unwrap_or(initial_loss),
        epoch_losses,
    });
    Ok(model)
}
