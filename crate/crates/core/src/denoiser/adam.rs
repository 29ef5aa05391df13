use serde::{Deserialize, Serialize};

use super::network::{Gradients, NetworkWeights};
use super::tensor::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates, one buffer per parameter slice of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
    pub step_count: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(weights: &NetworkWeights<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<T>> = weights
            .param_slices()
            .iter()
            .map(|s| vec![T::zero(); s.len()])
            .collect();
        Self {
            config,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
        }
    }
}

/// One bias-corrected ADAM update of every trainable parameter.
pub fn adam_step<T: Real>(
    weights: &mut NetworkWeights<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
) -> Result<()> {
    let grad_slices = grads.slices();
    let mut params = weights.param_slices_mut();
    if grad_slices.len() != params.len()
        || state.first_moment.len() != params.len()
        || params
            .iter()
            .zip(&grad_slices)
            .zip(&state.first_moment)
            .any(|((p, g), m)| p.len() != g.len() || p.len() != m.len())
    {
        return Err(Error::shape(
            "adam operands",
            format!("{} parameter slices", params.len()),
            format!("{} gradient slices", grad_slices.len()),
        ));
    }
    state.step_count += 1;
    let c = state.config;
    let t = state.step_count as i32;
    let b1 = T::of(c.beta1);
    let b2 = T::of(c.beta2);
    let one = T::one();
    let correction1 = T::of(1.0 - c.beta1.powi(t));
    let correction2 = T::of(1.0 - c.beta2.powi(t));
    let lr = T::of(c.learning_rate);
    let eps = T::of(c.epsilon);

    for (((p, g), m), v) in params
        .iter_mut()
        .zip(&grad_slices)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (one - b1) * gi;
            v[i] = b2 * v[i] + (one - b2) * gi * gi;
            let m_hat = m[i] / correction1;
            let v_hat = v[i] / correction2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
