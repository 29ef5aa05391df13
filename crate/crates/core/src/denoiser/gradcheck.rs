//! Central finite-difference verification of every backward pass, run in
//! double precision on small random instances.

use rand::Rng;
use serde::Serialize;

use super::batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormParams, BnMode};
use super::conv::{conv2d_backward, conv2d_forward, ColumnPadding, ConvLayerParams};
use super::network::{
    loss, loss_gradient, network_backward, network_forward, Mode, NetworkConfig, NetworkWeights,
};
use super::relu::{relu_backward, relu_forward};
use super::tensor::Tensor3;
use crate::error::Result;
use crate::rng::{derive_rng, Purpose, SimRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub trials: usize,
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub rows: usize,
    pub depth: usize,
    pub filters: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            trials: 20,
            step: 1e-5,
            tolerance: 1e-5,
            seed: 0,
            rows: 8,
            depth: 3,
            filters: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub trials: usize,
    /// Worst ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖) over trials.
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub checks: Vec<CheckResult>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = na.max(nn);
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `f` with respect to each entry of the slice
/// selected by `select`.
fn numeric_gradient<S: Clone>(
    state: &S,
    step: f64,
    select: impl Fn(&mut S) -> &mut [f64],
    f: impl Fn(&S) -> f64,
) -> Vec<f64> {
    let mut probe = state.clone();
    let n = select(&mut probe).len();
    (0..n)
        .map(|i| {
            let mut plus = state.clone();
            select(&mut plus)[i] += step;
            let mut minus = state.clone();
            select(&mut minus)[i] -= step;
            (f(&plus) - f(&minus)) / (2.0 * step)
        })
        .collect()
}

fn random_tensor(rng: &mut SimRng, rows: usize, cols: usize, ch: usize) -> Tensor3<f64> {
    let data = (0..rows * cols * ch).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    Tensor3::from_vec(rows, cols, ch, data).unwrap()
}

fn dot(a: &Tensor3<f64>, b: &Tensor3<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

struct Tracker {
    name: String,
    trials: usize,
    worst: f64,
}

impl Tracker {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            trials: 0,
            worst: 0.0,
        }
    }

    fn record(&mut self, err: f64) {
        self.worst = if err.is_nan() { f64::INFINITY } else { self.worst.max(err) };
    }

    fn finish(self, tolerance: f64) -> CheckResult {
        CheckResult {
            passed: self.worst < tolerance,
            name: self.name,
            trials: self.trials,
            max_rel_error: self.worst,
        }
    }
}

fn check_conv(cfg: &GradCheckConfig, padding: ColumnPadding, label: &str) -> Result<Vec<CheckResult>> {
    let mut input_t = Tracker::new(format!("conv {label} / input"));
    let mut kernel_t = Tracker::new(format!("conv {label} / kernels"));
    let mut bias_t = Tracker::new(format!("conv {label} / biases"));
    for trial in 0..cfg.trials {
        let mut rng = derive_rng(cfg.seed, Purpose::GradCheck, (trial + 1000 * padding as usize) as u64);
        let cin = rng.random_range(1..=3);
        let cout = rng.random_range(1..=4);
        let x = random_tensor(&mut rng, cfg.rows, 2, cin);
        let mut p = ConvLayerParams::<f64>::fan_in_uniform(5, 2, cin, cout, &mut rng);
        p.biases.iter_mut().for_each(|b| *b = rng.random::<f64>() - 0.5);
        let u = random_tensor(&mut rng, cfg.rows, 2, cout);
        let g = conv2d_backward(&x, &p, &u, padding)?;

        let obj = |x: &Tensor3<f64>, p: &ConvLayerParams<f64>| dot(&conv2d_forward(x, p, padding).unwrap(), &u);
        let nx = numeric_gradient(&x, cfg.step, |t| t.data_mut(), |t| obj(t, &p));
        let nk = numeric_gradient(&p, cfg.step, |q| &mut q.kernels[..], |q| obj(&x, q));
        let nb = numeric_gradient(&p, cfg.step, |q| &mut q.biases[..], |q| obj(&x, q));
        input_t.record(relative_error(g.input.data(), &nx));
        kernel_t.record(relative_error(&g.kernels, &nk));
        bias_t.record(relative_error(&g.biases, &nb));
        input_t.trials += 1;
        kernel_t.trials += 1;
        bias_t.trials += 1;
    }
    Ok([input_t, kernel_t, bias_t]
        .into_iter()
        .map(|t| t.finish(cfg.tolerance))
        .collect())
}

fn check_relu(cfg: &GradCheckConfig) -> Result<CheckResult> {
    let mut t = Tracker::new("relu / input (off the kink)");
    for trial in 0..cfg.trials {
        let mut rng = derive_rng(cfg.seed, Purpose::GradCheck, 2000 + trial as u64);
        let mut x = random_tensor(&mut rng, cfg.rows, 2, 3);
        // Keep every entry at least 0.1 away from the kink.
        for v in x.data_mut() {
            *v = v.signum() * (0.1 + v.abs());
        }
        let u = random_tensor(&mut rng, cfg.rows, 2, 3);
        let g = relu_backward(&x, &u)?;
        let n = numeric_gradient(&x, cfg.step, |t| t.data_mut(), |t| dot(&relu_forward(t), &u));
        t.record(relative_error(g.data(), &n));
        t.trials += 1;
    }
    Ok(t.finish(cfg.tolerance))
}

fn check_batchnorm(cfg: &GradCheckConfig) -> Result<Vec<CheckResult>> {
    let mut input_t = Tracker::new("batchnorm / input");
    let mut gamma_t = Tracker::new("batchnorm / gamma");
    let mut beta_t = Tracker::new("batchnorm / beta");
    for trial in 0..cfg.trials {
        let mut rng = derive_rng(cfg.seed, Purpose::GradCheck, 3000 + trial as u64);
        let ch = rng.random_range(1..=4);
        let b = rng.random_range(2..=4);
        let batch: Vec<Tensor3<f64>> = (0..b).map(|_| random_tensor(&mut rng, cfg.rows, 2, ch)).collect();
        let mut p = BatchNormParams::identity(ch, 0.9, 1e-5);
        p.gamma.iter_mut().for_each(|g| *g = 0.5 + rng.random::<f64>());
        p.beta.iter_mut().for_each(|g| *g = rng.random::<f64>() - 0.5);
        let ups: Vec<Tensor3<f64>> = (0..b).map(|_| random_tensor(&mut rng, cfg.rows, 2, ch)).collect();

        let (_, cache) = batchnorm_forward(&batch, &p, BnMode::Training)?;
        let g = batchnorm_backward(&cache, &ups)?;
        let obj = |x: &[Tensor3<f64>], p: &BatchNormParams<f64>| {
            let (y, _) = batchnorm_forward(x, p, BnMode::Training).unwrap();
            y.iter().zip(&ups).map(|(a, u)| dot(a, u)).sum::<f64>()
        };
        // Flatten the batch so every input entry is perturbed.
        let flat: Vec<f64> = batch.iter().flat_map(|t| t.data().to_vec()).collect();
        let per = cfg.rows * 2 * ch;
        let rebuild = |v: &[f64]| -> Vec<Tensor3<f64>> {
            v.chunks(per)
                .map(|c| Tensor3::from_vec(cfg.rows, 2, ch, c.to_vec()).unwrap())
                .collect()
        };
        let nx = numeric_gradient(&flat, cfg.step, |v| &mut v[..], |v| obj(&rebuild(v), &p));
        let ng = numeric_gradient(&p, cfg.step, |q| &mut q.gamma[..], |q| obj(&batch, q));
        let nb = numeric_gradient(&p, cfg.step, |q| &mut q.beta[..], |q| obj(&batch, q));
        let ax: Vec<f64> = g.input.iter().flat_map(|t| t.data().to_vec()).collect();
        input_t.record(relative_error(&ax, &nx));
        gamma_t.record(relative_error(&g.gamma, &ng));
        beta_t.record(relative_error(&g.beta, &nb));
        input_t.trials += 1;
        gamma_t.trials += 1;
        beta_t.trials += 1;
    }
    Ok([input_t, gamma_t, beta_t]
        .into_iter()
        .map(|t| t.finish(cfg.tolerance))
        .collect())
}

fn check_network(cfg: &GradCheckConfig) -> Result<CheckResult> {
    let net = NetworkConfig {
        depth: cfg.depth,
        hidden_filters: cfg.filters,
        ..Default::default()
    };
    let mut t = Tracker::new(format!(
        "network loss / all parameters (S={}, D={}, {} filters)",
        cfg.rows, cfg.depth, cfg.filters
    ));
    for trial in 0..cfg.trials {
        let mut rng = derive_rng(cfg.seed, Purpose::GradCheck, 4000 + trial as u64);
        let mut w = NetworkWeights::<f64>::init(&net, &mut rng);
        for c in &mut w.conv {
            c.biases.iter_mut().for_each(|b| *b = 0.2 * (rng.random::<f64>() - 0.5));
        }
        for b in &mut w.bn {
            b.gamma.iter_mut().for_each(|g| *g = 0.5 + rng.random::<f64>());
            b.beta.iter_mut().for_each(|g| *g = rng.random::<f64>() - 0.5);
        }
        let batch: Vec<Tensor3<f64>> = (0..3).map(|_| random_tensor(&mut rng, cfg.rows, 2, 2)).collect();
        let target: Vec<Tensor3<f64>> = (0..3).map(|_| random_tensor(&mut rng, cfg.rows, 2, 1)).collect();

        let (y, cache) = network_forward(&batch, &w, &net, Mode::Training)?;
        let grads = network_backward(&cache, &w, &loss_gradient(&y, &target)?)?;
        let obj = |w: &NetworkWeights<f64>| {
            let (y, _) = network_forward(&batch, w, &net, Mode::Training).unwrap();
            loss(&y, &target).unwrap()
        };
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for (j, g) in grads.slices().into_iter().enumerate() {
            analytic.extend_from_slice(g);
            numeric.extend(numeric_gradient(&w, cfg.step, |w| w.param_slices_mut().swap_remove(j), obj));
        }
        t.record(relative_error(&analytic, &numeric));
        t.trials += 1;
    }
    Ok(t.finish(cfg.tolerance))
}

/// Runs every check: conv (both column paddings), ReLU, batch norm and the
/// end-to-end loss.
pub fn run_gradcheck(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut checks = Vec::new();
    checks.extend(check_conv(cfg, ColumnPadding::Wrap, "wrap")?);
    checks.extend(check_conv(cfg, ColumnPadding::Zero, "zero")?);
    checks.push(check_relu(cfg)?);
    checks.extend(check_batchnorm(cfg)?);
    checks.push(check_network(cfg)?);
    Ok(GradCheckReport { checks })
}
