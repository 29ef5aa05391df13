//! Matched-filter bank and reduced-dimension decorrelating (RDD) detection.
//!
//! With orthonormal codes the RDD statistics are exactly the matched-filter
//! outputs, so one code path serves both.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sigmodel::{ActiveSet, SpreadingMatrix, SymbolAlphabet};

/// Correlator outputs t_i = s_i^H ỹ, one per user.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionStatistics {
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub indices: Vec<usize>,
    pub symbols: Vec<Complex64>,
    pub statistics: DetectionStatistics,
}

pub fn mfb(codes: &SpreadingMatrix, signal: &[Complex64]) -> Result<DetectionStatistics> {
    if signal.len() != codes.spreading_factor() {
        return Err(Error::shape("mfb input", codes.spreading_factor(), signal.len()));
    }
    let values = (0..codes.num_users())
        .map(|i| {
            codes
                .column(i)
                .iter()
                .zip(signal)
                .map(|(c, x)| c.conj() * x)
                .sum()
        })
        .collect();
    Ok(DetectionStatistics { values })
}

/// Picks the `num_active` largest |t_i| (ties to the lower index) and the
/// nearest alphabet point for each.
pub fn rdd_detect(
    stats: &DetectionStatistics,
    num_active: usize,
    alphabet: &SymbolAlphabet,
) -> Result<DetectionResult> {
    let n = stats.values.len();
    if num_active > n {
        return Err(Error::TooMany {
            what: "users to detect",
            requested: num_active,
            available: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps lower indices first among equal magnitudes.
    order.sort_by(|&a, &b| {
        stats.values[b]
            .norm_sqr()
            .total_cmp(&stats.values[a].norm_sqr())
    });
    let mut indices = order[..num_active].to_vec();
    indices.sort_unstable();
    let symbols = indices
        .iter()
        .map(|&i| alphabet.points()[alphabet.nearest(stats.values[i])])
        .collect();
    Ok(DetectionResult {
        indices,
        symbols,
        statistics: stats.clone(),
    })
}

/// True when the run is in error: a wrong active set or any wrong symbol.
pub fn run_error(result: &DetectionResult, truth: &ActiveSet) -> bool {
    let mut truth_pairs: Vec<(usize, Complex64)> = truth.iter().collect();
    truth_pairs.sort_by_key(|p| p.0);
    let detected: Vec<(usize, Complex64)> = result
        .indices
        .iter()
        .copied()
        .zip(result.symbols.iter().copied())
        .collect();
    detected != truth_pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigmodel::hadamard_codes;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mfb_isolates_a_user() {
        let codes = hadamard_codes(16).unwrap();
        let amp = c(0.6, -0.6) * 1.3;
        let signal: Vec<Complex64> = codes.column(7).iter().map(|x| x * amp).collect();
        let t = mfb(&codes, &signal).unwrap();
        for (i, v) in t.values.iter().enumerate() {
            let expected = if i == 7 { amp } else { c(0.0, 0.0) };
            assert!((v - expected).norm() < 1e-12);
        }
        let zero = mfb(&codes, &[c(0.0, 0.0); 16]).unwrap();
        assert!(zero.values.iter().all(|v| v.norm() == 0.0));
        assert!(mfb(&codes, &[c(0.0, 0.0); 15]).is_err());
    }

    #[test]
    fn rdd_small_example() {
        let q = SymbolAlphabet::qpsk();
        let t = DetectionStatistics {
            values: vec![
                c(0.0, 0.0),
                c(0.9 * FRAC_1_SQRT_2, 0.9 * FRAC_1_SQRT_2),
                c(0.1, 0.0),
                c(0.0, 0.0),
            ],
        };
        let r = rdd_detect(&t, 1, &q).unwrap();
        assert_eq!(r.indices, vec![1]);
        assert_eq!(r.symbols, vec![c(FRAC_1_SQRT_2, FRAC_1_SQRT_2)]);
        assert!(rdd_detect(&t, 0, &q).unwrap().indices.is_empty());
        assert!(rdd_detect(&t, 5, &q).is_err());
    }

    #[test]
    fn rdd_ties_prefer_lower_index() {
        let q = SymbolAlphabet::qpsk();
        let t = DetectionStatistics {
            values: vec![c(0.0, 1.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.5, 0.0)],
        };
        assert_eq!(rdd_detect(&t, 2, &q).unwrap().indices, vec![0, 1]);
    }

    #[test]
    fn run_error_cases() {
        let q = SymbolAlphabet::qpsk();
        let p = q.points();
        let truth = ActiveSet {
            indices: vec![2, 5],
            symbols: vec![p[0], p[3]],
        };
        let stats = DetectionStatistics { values: vec![] };
        let exact = DetectionResult {
            indices: vec![2, 5],
            symbols: vec![p[0], p[3]],
            statistics: stats.clone(),
        };
        assert!(!run_error(&exact, &truth));
        let wrong_symbol = DetectionResult {
            symbols: vec![p[0], p[2]],
            ..exact.clone()
        };
        assert!(run_error(&wrong_symbol, &truth));
        let wrong_index = DetectionResult {
            indices: vec![2, 6],
            ..exact.clone()
        };
        assert!(run_error(&wrong_index, &truth));
    }
}
