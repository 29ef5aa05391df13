//! The D-layer suppression network.
//!
//! Layer 1 is conv → ReLU, layers 2..D−1 are conv → ReLU → BN (normalization
//! after the activation), and layer D is a single-filter conv producing the
//! (S, 2, 1) real/imaginary image.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormParams, BnCache, BnMode};
use super::conv::{conv2d_backward_into, conv2d_forward, ColumnPadding, ConvLayerParams};
use super::relu::{mask_in_place, relu_in_place};
use super::tensor::{Real, Tensor3};
use crate::error::{Error, Result};

pub const INPUT_CHANNELS: usize = 2;
pub const OUTPUT_CHANNELS: usize = 1;
/// Column padding used by every layer of the network.
pub const NETWORK_PADDING: ColumnPadding = ColumnPadding::Wrap;

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPSILON: f64 = 1e-5;

pub type Mode = BnMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub depth: usize,
    pub hidden_filters: usize,
    pub kernel_rows: usize,
    pub kernel_cols: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            depth: 5,
            hidden_filters: 32,
            kernel_rows: 5,
            kernel_cols: 2,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::InvalidConfig(format!(
                "network depth must be at least 2, got {}",
                self.depth
            )));
        }
        if self.hidden_filters == 0 || self.kernel_rows == 0 || self.kernel_cols == 0 {
            return Err(Error::InvalidConfig(
                "filters and kernel dimensions must be positive".into(),
            ));
        }
        Ok(())
    }

    /// (input channels, output channels) of conv layer `layer` (0-based).
    pub fn layer_channels(&self, layer: usize) -> (usize, usize) {
        let cin = if layer == 0 { INPUT_CHANNELS } else { self.hidden_filters };
        let cout = if layer + 1 == self.depth { OUTPUT_CHANNELS } else { self.hidden_filters };
        (cin, cout)
    }

    pub fn num_bn_layers(&self) -> usize {
        self.depth - 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights<T> {
    pub conv: Vec<ConvLayerParams<T>>,
    /// Normalization of hidden layers 2..D−1; `bn[i]` follows `conv[i + 1]`.
    pub bn: Vec<BatchNormParams<T>>,
}

impl<T: Real> NetworkWeights<T> {
    pub fn zeros(config: &NetworkConfig) -> Self {
        let conv = (0..config.depth)
            .map(|l| {
                let (cin, cout) = config.layer_channels(l);
                ConvLayerParams::zeros(config.kernel_rows, config.kernel_cols, cin, cout)
            })
            .collect();
        let bn = (0..config.num_bn_layers())
            .map(|_| {
                BatchNormParams::identity(config.hidden_filters, T::of(BN_MOMENTUM), T::of(BN_EPSILON))
            })
            .collect();
        Self { conv, bn }
    }

    /// Fan-in uniform kernels and biases, identity normalization.
    pub fn init<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Self {
        let mut w = Self::zeros(config);
        for (l, layer) in w.conv.iter_mut().enumerate() {
            let (cin, cout) = config.layer_channels(l);
            *layer = ConvLayerParams::fan_in_uniform(config.kernel_rows, config.kernel_cols, cin, cout, rng);
        }
        w
    }

    pub fn check(&self, config: &NetworkConfig) -> Result<()> {
        config.validate()?;
        if self.conv.len() != config.depth || self.bn.len() != config.num_bn_layers() {
            return Err(Error::shape(
                "network layers",
                format!("{} conv / {} bn", config.depth, config.num_bn_layers()),
                format!("{} conv / {} bn", self.conv.len(), self.bn.len()),
            ));
        }
        for (l, p) in self.conv.iter().enumerate() {
            let (cin, cout) = config.layer_channels(l);
            let n = config.kernel_rows * config.kernel_cols * cin * cout;
            if p.kernel_rows != config.kernel_rows
                || p.kernel_cols != config.kernel_cols
                || p.in_channels != cin
                || p.out_channels != cout
                || p.kernels.len() != n
                || p.biases.len() != cout
            {
                return Err(Error::shape(
                    "conv layer",
                    format!("{}x{}x{cin}x{cout}", config.kernel_rows, config.kernel_cols),
                    format!("{}x{}x{}x{}", p.kernel_rows, p.kernel_cols, p.in_channels, p.out_channels),
                ));
            }
        }
        for b in &self.bn {
            let c = config.hidden_filters;
            if [b.gamma.len(), b.beta.len(), b.running_mean.len(), b.running_var.len()]
                .iter()
                .any(|&n| n != c)
            {
                return Err(Error::shape("batch norm layer", c, b.gamma.len()));
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> NetworkWeights<U> {
        NetworkWeights {
            conv: self.conv.iter().map(|c| c.cast()).collect(),
            bn: self.bn.iter().map(|b| b.cast()).collect(),
        }
    }

    /// Trainable parameters in a fixed order: every layer's kernels then
    /// biases, followed by every BN layer's gamma then beta.
    pub fn param_slices(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for c in &self.conv {
            out.push(&c.kernels);
            out.push(&c.biases);
        }
        for b in &self.bn {
            out.push(&b.gamma);
            out.push(&b.beta);
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for c in &mut self.conv {
            out.push(&mut c.kernels);
            out.push(&mut c.biases);
        }
        for b in &mut self.bn {
            out.push(&mut b.gamma);
            out.push(&mut b.beta);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    pub fn update_running_stats(&mut self, cache: &ForwardCache<T>) -> Result<()> {
        for (b, layer) in self.bn.iter_mut().zip(&cache.layers[1..]) {
            if let Some(bc) = &layer.bn {
                b.update_running_stats(bc)?;
            }
        }
        Ok(())
    }
}

/// Gradients laid out like [`NetworkWeights::param_slices`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub conv_kernels: Vec<Vec<T>>,
    pub conv_biases: Vec<Vec<T>>,
    pub bn_gamma: Vec<Vec<T>>,
    pub bn_beta: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(weights: &NetworkWeights<T>) -> Self {
        Self {
            conv_kernels: weights.conv.iter().map(|c| vec![T::zero(); c.kernels.len()]).collect(),
            conv_biases: weights.conv.iter().map(|c| vec![T::zero(); c.biases.len()]).collect(),
            bn_gamma: weights.bn.iter().map(|b| vec![T::zero(); b.gamma.len()]).collect(),
            bn_beta: weights.bn.iter().map(|b| vec![T::zero(); b.beta.len()]).collect(),
        }
    }

    pub fn slices(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for (k, b) in self.conv_kernels.iter().zip(&self.conv_biases) {
            out.push(k);
            out.push(b);
        }
        for (g, b) in self.bn_gamma.iter().zip(&self.bn_beta) {
            out.push(g);
            out.push(b);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    /// Input of the conv sublayer.
    pub input: Vec<Tensor3<T>>,
    /// Conv output before the ReLU; absent for the output layer.
    pub pre_activation: Option<Vec<Tensor3<T>>>,
    pub bn: Option<BnCache<T>>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub mode: Mode,
    pub layers: Vec<LayerCache<T>>,
}

fn conv_batch<T: Real>(batch: &[Tensor3<T>], params: &ConvLayerParams<T>) -> Result<Vec<Tensor3<T>>> {
    batch
        .par_iter()
        .map(|x| conv2d_forward(x, params, NETWORK_PADDING))
        .collect()
}

fn check_batch<T: Real>(batch: &[Tensor3<T>]) -> Result<()> {
    let Some(first) = batch.first() else {
        return Err(Error::EmptyDataset);
    };
    let (rows, cols, ch) = first.dims();
    if cols != 2 || ch != INPUT_CHANNELS {
        return Err(Error::shape("network input", "(S, 2, 2)", format!("{:?}", first.dims())));
    }
    if batch.iter().any(|t| t.dims() != (rows, cols, ch)) {
        return Err(Error::shape("network input batch", format!("{:?}", first.dims()), "mixed shapes"));
    }
    Ok(())
}

fn forward_impl<T: Real>(
    batch: &[Tensor3<T>],
    weights: &NetworkWeights<T>,
    config: &NetworkConfig,
    mode: Mode,
    keep: bool,
) -> Result<(Vec<Tensor3<T>>, ForwardCache<T>)> {
    weights.check(config)?;
    check_batch(batch)?;
    if mode == Mode::Training && config.num_bn_layers() > 0 && batch.len() < 2 {
        return Err(Error::DegenerateBatch(batch.len()));
    }
    let mut layers = Vec::with_capacity(config.depth);
    let mut x: Vec<Tensor3<T>> = batch.to_vec();
    for (l, params) in weights.conv.iter().enumerate() {
        let mut z = conv_batch(&x, params)?;
        let input = if keep { std::mem::take(&mut x) } else { Vec::new() };
        if l + 1 == config.depth {
            layers.push(LayerCache {
                input,
                pre_activation: None,
                bn: None,
            });
            x = z;
            break;
        }
        let pre = keep.then(|| z.clone());
        z.iter_mut().for_each(|t| relu_in_place(t.data_mut()));
        let bn = if l == 0 {
            None
        } else {
            let (y, cache) = batchnorm_forward(&z, &weights.bn[l - 1], mode)?;
            z = y;
            Some(cache)
        };
        layers.push(LayerCache {
            input,
            pre_activation: pre,
            bn: if keep { bn } else { None },
        });
        x = z;
    }
    Ok((x, ForwardCache { mode, layers }))
}

/// Runs the network on a batch of (S, 2, 2) inputs and returns (S, 2, 1)
/// outputs plus the activations needed by [`network_backward`].
pub fn network_forward<T: Real>(
    batch: &[Tensor3<T>],
    weights: &NetworkWeights<T>,
    config: &NetworkConfig,
    mode: Mode,
) -> Result<(Vec<Tensor3<T>>, ForwardCache<T>)> {
    forward_impl(batch, weights, config, mode, true)
}

/// Forward pass without retaining activations.
pub fn network_predict<T: Real>(
    batch: &[Tensor3<T>],
    weights: &NetworkWeights<T>,
    config: &NetworkConfig,
    mode: Mode,
) -> Result<Vec<Tensor3<T>>> {
    forward_impl(batch, weights, config, mode, false).map(|(y, _)| y)
}

pub fn network_backward<T: Real>(
    cache: &ForwardCache<T>,
    weights: &NetworkWeights<T>,
    upstream: &[Tensor3<T>],
) -> Result<Gradients<T>> {
    if cache.mode != Mode::Training {
        return Err(Error::InferenceCache);
    }
    let depth = weights.conv.len();
    if cache.layers.len() != depth {
        return Err(Error::shape("forward cache", depth, cache.layers.len()));
    }
    let mut grads = Gradients::zeros_like(weights);
    let mut g: Vec<Tensor3<T>> = upstream.to_vec();

    for l in (0..depth).rev() {
        let layer = &cache.layers[l];
        if l + 1 < depth {
            if let Some(bc) = &layer.bn {
                let bg = batchnorm_backward(bc, &g)?;
                grads.bn_gamma[l - 1] = bg.gamma;
                grads.bn_beta[l - 1] = bg.beta;
                g = bg.input;
            }
            let pre = layer.pre_activation.as_ref().ok_or(Error::InferenceCache)?;
            for (gt, pt) in g.iter_mut().zip(pre) {
                mask_in_place(pt.data(), gt.data_mut());
            }
        }
        let params = &weights.conv[l];
        let need_input = l > 0;
        if layer.input.len() != g.len() {
            return Err(Error::shape("conv upstream batch", layer.input.len(), g.len()));
        }
        // Per-example partial gradients, reduced below in batch order so the
        // sum does not depend on how the examples were scheduled.
        let parts: Vec<(Vec<T>, Vec<T>, Option<Tensor3<T>>)> = layer
            .input
            .par_iter()
            .zip(g.par_iter())
            .map(|(x, up)| {
                let mut kg = vec![T::zero(); params.kernels.len()];
                let mut bg = vec![T::zero(); params.biases.len()];
                let mut ig = need_input.then(|| {
                    let (r, c, ch) = x.dims();
                    Tensor3::zeros(r, c, ch)
                });
                conv2d_backward_into(x, params, up, NETWORK_PADDING, &mut kg, &mut bg, ig.as_mut())?;
                Ok((kg, bg, ig))
            })
            .collect::<Result<_>>()?;
        let kacc = &mut grads.conv_kernels[l];
        let bacc = &mut grads.conv_biases[l];
        let mut next = Vec::with_capacity(parts.len());
        for (kg, bg, ig) in parts {
            kacc.iter_mut().zip(&kg).for_each(|(a, v)| *a += *v);
            bacc.iter_mut().zip(&bg).for_each(|(a, v)| *a += *v);
            if let Some(ig) = ig {
                next.push(ig);
            }
        }
        g = next;
    }
    Ok(grads)
}

fn check_pair<T: Real>(prediction: &[Tensor3<T>], target: &[Tensor3<T>]) -> Result<()> {
    if prediction.len() != target.len()
        || prediction.iter().zip(target).any(|(p, t)| !p.same_shape(t))
    {
        return Err(Error::shape(
            "loss operands",
            format!("{} tensors", prediction.len()),
            format!("{} tensors", target.len()),
        ));
    }
    Ok(())
}

/// Σ_k ‖target_k − prediction_k‖² over both the real and imaginary planes.
pub fn loss<T: Real>(prediction: &[Tensor3<T>], target: &[Tensor3<T>]) -> Result<T> {
    check_pair(prediction, target)?;
    let mut s = 0.0f64;
    for (p, t) in prediction.iter().zip(target) {
        for (a, b) in p.data().iter().zip(t.data()) {
            let d = (*a - *b).to_f64().unwrap();
            s += d * d;
        }
    }
    Ok(T::of(s))
}

/// Per-example loss values.
pub fn example_losses<T: Real>(prediction: &[Tensor3<T>], target: &[Tensor3<T>]) -> Result<Vec<f64>> {
    check_pair(prediction, target)?;
    Ok(prediction
        .iter()
        .zip(target)
        .map(|(p, t)| {
            p.data()
                .iter()
                .zip(t.data())
                .map(|(a, b)| (*a - *b).to_f64().unwrap().powi(2))
                .sum()
        })
        .collect())
}

/// d loss / d prediction = 2 (prediction − target).
pub fn loss_gradient<T: Real>(prediction: &[Tensor3<T>], target: &[Tensor3<T>]) -> Result<Vec<Tensor3<T>>> {
    check_pair(prediction, target)?;
    let two = T::of(2.0);
    Ok(prediction
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let mut g = p.clone();
            for (a, b) in g.data_mut().iter_mut().zip(t.data()) {
                *a = two * (*a - *b);
            }
            g
        })
        .collect())
}
