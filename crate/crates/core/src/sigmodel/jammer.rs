use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JammerConfig {
    /// Linear amplitude A; every jammed chip has magnitude exactly A.
    pub amplitude: f64,
    /// Number of dwell segments per symbol period.
    pub num_segments: usize,
    pub enabled: bool,
}

/// One symbol period of a fast frequency-hopping jammer.
#[derive(Debug, Clone, PartialEq)]
pub struct JammerRealization {
    pub chips: Vec<Complex64>,
    /// Chip index at which each segment after the first begins.
    pub segment_boundaries: Vec<usize>,
    /// Normalized frequency per segment, in [0, 1).
    pub frequencies: Vec<f64>,
    /// Phase per segment, in [0, 2π).
    pub phases: Vec<f64>,
}

impl JammerRealization {
    pub fn silent(spreading_factor: usize) -> Self {
        Self {
            chips: vec![Complex64::new(0.0, 0.0); spreading_factor],
            segment_boundaries: Vec::new(),
            frequencies: Vec::new(),
            phases: Vec::new(),
        }
    }

    /// Synthesizes z_k = A·exp(j(2π f_m k + φ_m)) for chip k (0-based) in
    /// segment m, from an explicit hop schedule.
    pub fn from_schedule(
        amplitude: f64,
        spreading_factor: usize,
        segment_boundaries: Vec<usize>,
        frequencies: Vec<f64>,
        phases: Vec<f64>,
    ) -> Result<Self> {
        let segments = segment_boundaries.len() + 1;
        if frequencies.len() != segments || phases.len() != segments {
            return Err(Error::shape(
                "jammer schedule",
                format!("{segments} frequencies and phases"),
                format!("{} / {}", frequencies.len(), phases.len()),
            ));
        }
        let ordered = segment_boundaries.windows(2).all(|w| w[0] < w[1]);
        let in_range = segment_boundaries
            .iter()
            .all(|&b| b > 0 && b < spreading_factor);
        if !ordered || !in_range {
            return Err(Error::InvalidConfig(
                "segment boundaries must be strictly increasing inner chip indices".into(),
            ));
        }

        let mut chips = Vec::with_capacity(spreading_factor);
        let mut segment = 0;
        for k in 0..spreading_factor {
            if segment < segment_boundaries.len() && k == segment_boundaries[segment] {
                segment += 1;
            }
            let arg = TAU * frequencies[segment] * k as f64 + phases[segment];
            chips.push(Complex64::from_polar(amplitude, arg));
        }
        Ok(Self {
            chips,
            segment_boundaries,
            frequencies,
            phases,
        })
    }

    pub fn num_segments(&self) -> usize {
        if self.frequencies.is_empty() {
            0
        } else {
            self.segment_boundaries.len() + 1
        }
    }
}

/// Draws a hop schedule: `num_segments - 1` distinct boundaries chosen
/// uniformly among the S-1 inter-chip positions, then an independent
/// uniform frequency and phase per segment.
pub fn draw_jammer<R: Rng + ?Sized>(
    config: &JammerConfig,
    spreading_factor: usize,
    rng: &mut R,
) -> Result<JammerRealization> {
    if config.num_segments == 0 || config.num_segments > spreading_factor {
        return Err(Error::TooMany {
            what: "jammer segments",
            requested: config.num_segments,
            available: spreading_factor,
        });
    }
    if !config.enabled {
        return Ok(JammerRealization::silent(spreading_factor));
    }
    let mut boundaries: Vec<usize> =
        rand::seq::index::sample(rng, spreading_factor - 1, config.num_segments - 1)
            .into_iter()
            .map(|p| p + 1)
            .collect();
    boundaries.sort_unstable();
    let frequencies = (0..config.num_segments)
        .map(|_| rng.random::<f64>())
        .collect();
    let phases = (0..config.num_segments)
        .map(|_| rng.random::<f64>() * TAU)
        .collect();
    JammerRealization::from_schedule(
        config.amplitude,
        spreading_factor,
        boundaries,
        frequencies,
        phases,
    )
}
