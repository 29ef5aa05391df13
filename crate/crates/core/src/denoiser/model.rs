use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::input::{build_input_tensor, output_to_signal};
use super::network::{network_predict, Mode, NetworkConfig, NetworkWeights};
use crate::error::{Error, Result};
use crate::sigmodel::{ScenarioConfig, SpreadingMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub scenario: ScenarioConfig,
    pub num_examples: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub initial_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
}

/// A network with frozen normalization statistics. The model file carries
/// only `config` and `weights`; `meta` travels separately.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: NetworkConfig,
    pub weights: NetworkWeights<f32>,
    pub meta: Option<TrainingMeta>,
}

impl TrainedModel {
    pub fn new(config: NetworkConfig, weights: NetworkWeights<f32>) -> Result<Self> {
        weights.check(&config)?;
        Ok(Self {
            config,
            weights,
            meta: None,
        })
    }
}

/// Suppresses the jammer in one received vector: builds the input tensor,
/// runs inference, and maps the output back to the received-signal scale.
pub fn denoise(
    model: &TrainedModel,
    received: &[Complex64],
    codes: &SpreadingMatrix,
) -> Result<Vec<Complex64>> {
    if received.len() != codes.spreading_factor() {
        return Err(Error::shape("denoise input", codes.spreading_factor(), received.len()));
    }
    let input = build_input_tensor::<f32>(received, codes)?;
    let out = network_predict(
        std::slice::from_ref(&input.tensor),
        &model.weights,
        &model.config,
        Mode::Inference,
    )?;
    Ok(output_to_signal(&out[0], input.scale_received))
}
