use num_complex::Complex64;

use super::tensor::{Real, Tensor3};
use crate::detector::mfb;
use crate::error::{Error, Result};
use crate::sigmodel::SpreadingMatrix;

/// Two-channel (S, 2, 2) network input: channel 0 holds [Re r | Im r],
/// channel 1 holds [Re S^H r | Im S^H r], each divided by the largest
/// complex magnitude of its source signal.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTensor<T> {
    pub tensor: Tensor3<T>,
    pub scale_received: f64,
    pub scale_mfb: f64,
}

fn peak(x: &[Complex64]) -> f64 {
    let m = x.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

pub fn build_input_tensor<T: Real>(
    received: &[Complex64],
    codes: &SpreadingMatrix,
) -> Result<InputTensor<T>> {
    let s = codes.spreading_factor();
    if codes.num_users() != s {
        return Err(Error::shape("input tensor codes (N must equal S)", s, codes.num_users()));
    }
    let stats = mfb(codes, received)?;
    let scale_received = peak(received);
    let scale_mfb = peak(&stats.values);
    let mut t = Tensor3::zeros(s, 2, 2);
    for k in 0..s {
        let r = received[k] / scale_received;
        let m = stats.values[k] / scale_mfb;
        t.set(k, 0, 0, T::of(r.re));
        t.set(k, 1, 0, T::of(r.im));
        t.set(k, 0, 1, T::of(m.re));
        t.set(k, 1, 1, T::of(m.im));
    }
    Ok(InputTensor {
        tensor: t,
        scale_received,
        scale_mfb,
    })
}

/// Training target: the clean mixture as a (S, 2, 1) [Re | Im] image on the
/// received-signal scale.
pub fn target_tensor<T: Real>(clean: &[Complex64], scale_received: f64) -> Tensor3<T> {
    let mut t = Tensor3::zeros(clean.len(), 2, 1);
    for (k, y) in clean.iter().enumerate() {
        t.set(k, 0, 0, T::of(y.re / scale_received));
        t.set(k, 1, 0, T::of(y.im / scale_received));
    }
    t
}

/// Inverse of [`target_tensor`].
pub fn output_to_signal<T: Real>(output: &Tensor3<T>, scale_received: f64) -> Vec<Complex64> {
    (0..output.rows())
        .map(|k| {
            Complex64::new(
                output.get(k, 0, 0).to_f64().unwrap(),
                output.get(k, 1, 0).to_f64().unwrap(),
            ) * scale_received
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, Purpose};
    use crate::sigmodel::hadamard_codes;
    use rand::Rng;

    #[test]
    fn shape_and_zero_guard() {
        let codes = hadamard_codes(16).unwrap();
        let x = build_input_tensor::<f64>(&[Complex64::new(0.0, 0.0); 16], &codes).unwrap();
        assert_eq!(x.tensor.dims(), (16, 2, 2));
        assert_eq!((x.scale_received, x.scale_mfb), (1.0, 1.0));
        assert!(x.tensor.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn channels_peak_at_one() {
        let codes = hadamard_codes(32).unwrap();
        let mut rng = derive_rng(0, Purpose::Dataset, 77);
        for _ in 0..50 {
            let r: Vec<Complex64> = (0..32)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 7.0)
                .collect();
            let x = build_input_tensor::<f64>(&r, &codes).unwrap();
            for ch in 0..2 {
                let m = (0..32)
                    .map(|k| Complex64::new(x.tensor.get(k, 0, ch), x.tensor.get(k, 1, ch)).norm())
                    .fold(0.0, f64::max);
                assert!((m - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_square_codes() {
        let entries = hadamard_codes(8).unwrap().column(0).to_vec();
        let codes = SpreadingMatrix::from_columns(8, 1, entries).unwrap();
        assert!(build_input_tensor::<f32>(&[Complex64::new(1.0, 0.0); 8], &codes).is_err());
    }

    #[test]
    fn target_round_trip() {
        let y: Vec<Complex64> = (0..8).map(|k| Complex64::new(k as f64, -(k as f64) / 2.0)).collect();
        let t = target_tensor::<f64>(&y, 4.0);
        let back = output_to_signal(&t, 4.0);
        for (a, b) in y.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
