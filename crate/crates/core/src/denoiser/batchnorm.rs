use super::tensor::{Real, Tensor3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub epsilon: T,
}

impl<T: Real> BatchNormParams<T> {
    /// gamma 1, beta 0, running statistics (0, 1).
    pub fn identity(channels: usize, momentum: T, epsilon: T) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum,
            epsilon,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// running ← momentum·running + (1 − momentum)·batch statistic.
    pub fn update_running_stats(&mut self, cache: &BnCache<T>) -> Result<()> {
        if cache.mode != BnMode::Training {
            return Err(Error::InferenceCache);
        }
        let m = self.momentum;
        let keep = T::one() - m;
        for c in 0..self.channels() {
            self.running_mean[c] = m * self.running_mean[c] + keep * cache.batch_mean[c];
            self.running_var[c] = m * self.running_var[c] + keep * cache.batch_var[c];
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> BatchNormParams<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::of(x.to_f64().unwrap())).collect();
        BatchNormParams {
            gamma: conv(&self.gamma),
            beta: conv(&self.beta),
            running_mean: conv(&self.running_mean),
            running_var: conv(&self.running_var),
            momentum: U::of(self.momentum.to_f64().unwrap()),
            epsilon: U::of(self.epsilon.to_f64().unwrap()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Normalize with the statistics of the current batch.
    Training,
    /// Normalize with the running statistics.
    Inference,
}

#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub mode: BnMode,
    pub normalized: Vec<Tensor3<T>>,
    pub inv_std: Vec<T>,
    pub gamma: Vec<T>,
    pub batch_mean: Vec<T>,
    pub batch_var: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct BnGrads<T> {
    pub input: Vec<Tensor3<T>>,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

fn check_batch<T: Real>(batch: &[Tensor3<T>], channels: usize) -> Result<()> {
    let Some(first) = batch.first() else {
        return Err(Error::DegenerateBatch(0));
    };
    if first.channels() != channels {
        return Err(Error::shape("batch norm channels", channels, first.channels()));
    }
    if batch.iter().any(|t| !t.same_shape(first)) {
        return Err(Error::shape(
            "batch norm batch",
            format!("{:?}", first.dims()),
            "mixed shapes",
        ));
    }
    Ok(())
}

/// Per-channel statistics are taken over batch × rows × cols.
pub fn batchnorm_forward<T: Real>(
    batch: &[Tensor3<T>],
    params: &BatchNormParams<T>,
    mode: BnMode,
) -> Result<(Vec<Tensor3<T>>, BnCache<T>)> {
    let ch = params.channels();
    check_batch(batch, ch)?;
    let (mean, var) = match mode {
        BnMode::Training => {
            if batch.len() < 2 {
                return Err(Error::DegenerateBatch(batch.len()));
            }
            let count = (batch.len() * batch[0].rows() * batch[0].cols()) as f64;
            let mut sum = vec![0.0f64; ch];
            for t in batch {
                for px in t.data().chunks_exact(ch) {
                    for (s, x) in sum.iter_mut().zip(px) {
                        *s += x.to_f64().unwrap();
                    }
                }
            }
            let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
            let mut sq = vec![0.0f64; ch];
            for t in batch {
                for px in t.data().chunks_exact(ch) {
                    for ((s, x), m) in sq.iter_mut().zip(px).zip(&mean) {
                        let d = x.to_f64().unwrap() - m;
                        *s += d * d;
                    }
                }
            }
            (
                mean.iter().map(|&m| T::of(m)).collect::<Vec<T>>(),
                sq.iter().map(|s| T::of(s / count)).collect::<Vec<T>>(),
            )
        }
        BnMode::Inference => (params.running_mean.clone(), params.running_var.clone()),
    };
    let inv_std: Vec<T> = var
        .iter()
        .map(|&v| T::one() / (v + params.epsilon).sqrt())
        .collect();

    let mut normalized = Vec::with_capacity(batch.len());
    let mut out = Vec::with_capacity(batch.len());
    for t in batch {
        let mut xhat = t.clone();
        let mut y = t.clone();
        for (hpx, ypx) in xhat
            .data_mut()
            .chunks_exact_mut(ch)
            .zip(y.data_mut().chunks_exact_mut(ch))
        {
            for c in 0..ch {
                let h = (hpx[c] - mean[c]) * inv_std[c];
                hpx[c] = h;
                ypx[c] = params.gamma[c] * h + params.beta[c];
            }
        }
        normalized.push(xhat);
        out.push(y);
    }
    let cache = BnCache {
        mode,
        normalized,
        inv_std,
        gamma: params.gamma.clone(),
        batch_mean: mean,
        batch_var: var,
    };
    Ok((out, cache))
}

/// Exact gradient of the training-mode map, including the dependence of
/// the batch mean and variance on every input.
pub fn batchnorm_backward<T: Real>(cache: &BnCache<T>, upstream: &[Tensor3<T>]) -> Result<BnGrads<T>> {
    if cache.mode != BnMode::Training {
        return Err(Error::InferenceCache);
    }
    if upstream.len() != cache.normalized.len()
        || upstream.iter().zip(&cache.normalized).any(|(u, x)| !u.same_shape(x))
    {
        return Err(Error::shape(
            "batch norm upstream",
            format!("{} tensors", cache.normalized.len()),
            format!("{} tensors", upstream.len()),
        ));
    }
    let ch = cache.gamma.len();
    let first = &cache.normalized[0];
    let count = (upstream.len() * first.rows() * first.cols()) as f64;

    let mut dbeta = vec![0.0f64; ch];
    let mut dgamma = vec![0.0f64; ch];
    for (u, xhat) in upstream.iter().zip(&cache.normalized) {
        for (upx, hpx) in u.data().chunks_exact(ch).zip(xhat.data().chunks_exact(ch)) {
            for c in 0..ch {
                let g = upx[c].to_f64().unwrap();
                dbeta[c] += g;
                dgamma[c] += g * hpx[c].to_f64().unwrap();
            }
        }
    }
    let scale: Vec<T> = (0..ch)
        .map(|c| cache.gamma[c] * cache.inv_std[c] / T::of(count))
        .collect();
    let n = T::of(count);
    let db: Vec<T> = dbeta.iter().map(|&v| T::of(v)).collect();
    let dg: Vec<T> = dgamma.iter().map(|&v| T::of(v)).collect();

    let input = upstream
        .iter()
        .zip(&cache.normalized)
        .map(|(u, xhat)| {
            let mut g = u.clone();
            for (gpx, hpx) in g.data_mut().chunks_exact_mut(ch).zip(xhat.data().chunks_exact(ch)) {
                for c in 0..ch {
                    gpx[c] = scale[c] * (n * gpx[c] - db[c] - hpx[c] * dg[c]);
                }
            }
            g
        })
        .collect();
    Ok(BnGrads {
        input,
        gamma: dg,
        beta: db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, Purpose};
    use rand::Rng;

    fn batch(rng: &mut impl Rng, b: usize, ch: usize) -> Vec<Tensor3<f64>> {
        (0..b)
            .map(|_| {
                let data = (0..8 * 2 * ch).map(|_| 3.0 * rng.random::<f64>() + 1.0).collect();
                Tensor3::from_vec(8, 2, ch, data).unwrap()
            })
            .collect()
    }

    #[test]
    fn training_output_is_standardized() {
        let mut rng = derive_rng(0, Purpose::GradCheck, 1);
        let x = batch(&mut rng, 4, 3);
        let p = BatchNormParams::identity(3, 0.9, 1e-5);
        let (y, _) = batchnorm_forward(&x, &p, BnMode::Training).unwrap();
        for c in 0..3 {
            let vals: Vec<f64> = y.iter().flat_map(|t| t.data().chunks(3).map(move |px| px[c])).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(m.abs() < 1e-6);
            assert!((v - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn inference_with_unit_stats_scales_by_epsilon() {
        let mut rng = derive_rng(1, Purpose::GradCheck, 1);
        let x = batch(&mut rng, 1, 2);
        let p = BatchNormParams::identity(2, 0.9, 1e-5);
        let (y, cache) = batchnorm_forward(&x, &p, BnMode::Inference).unwrap();
        let k = 1.0 / (1.0f64 + 1e-5).sqrt();
        for (a, b) in y[0].data().iter().zip(x[0].data()) {
            assert!((a - b * k).abs() < 1e-12);
        }
        assert!(matches!(batchnorm_backward(&cache, &y), Err(Error::InferenceCache)));
    }

    #[test]
    fn single_example_training_rejected() {
        let mut rng = derive_rng(2, Purpose::GradCheck, 1);
        let x = batch(&mut rng, 1, 2);
        let p = BatchNormParams::identity(2, 0.9, 1e-5);
        assert!(matches!(
            batchnorm_forward(&x, &p, BnMode::Training),
            Err(Error::DegenerateBatch(1))
        ));
    }

    #[test]
    fn simple_gradients() {
        let mut rng = derive_rng(3, Purpose::GradCheck, 1);
        let x = batch(&mut rng, 3, 2);
        let p = BatchNormParams::identity(2, 0.9, 1e-5);
        let (_, cache) = batchnorm_forward(&x, &p, BnMode::Training).unwrap();
        let zero: Vec<_> = x.iter().map(|_| Tensor3::zeros(8, 2, 2)).collect();
        let g = batchnorm_backward(&cache, &zero).unwrap();
        assert!(g.gamma.iter().chain(&g.beta).all(|v| *v == 0.0));
        assert!(g.input.iter().all(|t| t.data().iter().all(|v| *v == 0.0)));

        let up = batch(&mut rng, 3, 2);
        let g = batchnorm_backward(&cache, &up).unwrap();
        for c in 0..2 {
            let s: f64 = up.iter().flat_map(|t| t.data().chunks(2).map(move |px| px[c])).sum();
            assert!((g.beta[c] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn running_stats_update() {
        let mut rng = derive_rng(4, Purpose::GradCheck, 1);
        let x = batch(&mut rng, 2, 1);
        let mut p = BatchNormParams::identity(1, 0.9, 1e-5);
        let (_, cache) = batchnorm_forward(&x, &p, BnMode::Training).unwrap();
        p.update_running_stats(&cache).unwrap();
        assert!((p.running_mean[0] - 0.1 * cache.batch_mean[0]).abs() < 1e-15);
        assert!((p.running_var[0] - (0.9 + 0.1 * cache.batch_var[0])).abs() < 1e-15);
    }
}
