use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::alphabet::SymbolAlphabet;
use super::codes::SpreadingMatrix;
use super::jammer::{draw_jammer, JammerConfig, JammerRealization};
use crate::error::{Error, Result};

/// What 0 dB means for the jammer and noise levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerReference {
    /// Per-chip power of a unit-power user, 1/S with unit-norm codes.
    #[default]
    Chip,
    /// Total symbol-period power of a unit-power user, i.e. 1.
    Symbol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub spreading_factor: usize,
    pub num_users: usize,
    pub num_active: usize,
    pub jammer_power_db: f64,
    pub jammer_enabled: bool,
    pub noise_power_db: f64,
    pub channel_mag_low: f64,
    pub channel_mag_high: f64,
    pub num_segments: usize,
    pub power_reference: PowerReference,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            spreading_factor: 128,
            num_users: 128,
            num_active: 2,
            jammer_power_db: 20.0,
            jammer_enabled: true,
            noise_power_db: -10.0,
            channel_mag_low: 0.5,
            channel_mag_high: 1.5,
            num_segments: 100,
            power_reference: PowerReference::Chip,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.spreading_factor == 0 || self.num_users == 0 {
            return fail("spreading_factor and num_users must be positive".into());
        }
        if self.num_active > self.num_users {
            return Err(Error::TooMany {
                what: "active users",
                requested: self.num_active,
                available: self.num_users,
            });
        }
        if !(self.channel_mag_low >= 0.0 && self.channel_mag_low <= self.channel_mag_high) {
            return fail(format!(
                "channel magnitude interval [{}, {}] is invalid",
                self.channel_mag_low, self.channel_mag_high
            ));
        }
        if self.num_segments == 0 || self.num_segments > self.spreading_factor {
            return fail(format!(
                "num_segments must lie in 1..={}, got {}",
                self.spreading_factor, self.num_segments
            ));
        }
        if self.jammer_power_db.is_nan() || self.noise_power_db.is_nan() {
            return fail("power levels must not be NaN".into());
        }
        Ok(())
    }

    pub fn reference_power(&self) -> f64 {
        match self.power_reference {
            PowerReference::Chip => 1.0 / self.spreading_factor as f64,
            PowerReference::Symbol => 1.0,
        }
    }

    pub fn jammer_amplitude(&self) -> f64 {
        (self.reference_power() * 10f64.powf(self.jammer_power_db / 10.0)).sqrt()
    }

    /// Per-chip complex noise variance σ².
    pub fn noise_variance(&self) -> f64 {
        self.reference_power() * 10f64.powf(self.noise_power_db / 10.0)
    }

    pub fn jammer_config(&self) -> JammerConfig {
        JammerConfig {
            amplitude: self.jammer_amplitude(),
            num_segments: self.num_segments,
            enabled: self.jammer_enabled,
        }
    }
}

/// Active users of one symbol period; every other user transmits 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    pub indices: Vec<usize>,
    pub symbols: Vec<Complex64>,
}

impl ActiveSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.indices.iter().copied().zip(self.symbols.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub magnitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

impl ChannelRealization {
    pub fn coefficient(&self, user: usize) -> Complex64 {
        Complex64::from_polar(self.magnitudes[user], self.phases[user])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRealization {
    pub active: ActiveSet,
    pub channel: ChannelRealization,
    pub clean: Vec<Complex64>,
    pub jammer: JammerRealization,
    pub noise: Vec<Complex64>,
    pub received: Vec<Complex64>,
}

/// Normalized zero-forcing precoding: b·conj(h)/|h|.
pub fn precode_symbol(symbol: Complex64, channel: Complex64) -> Result<Complex64> {
    let mag = channel.norm();
    if mag == 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok(symbol * channel.conj() / mag)
}

pub fn draw_channel<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> ChannelRealization {
    let (lo, hi) = (config.channel_mag_low, config.channel_mag_high);
    let n = config.num_users;
    let magnitudes = (0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
    let phases = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
    ChannelRealization { magnitudes, phases }
}

pub fn draw_active_set<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    alphabet: &SymbolAlphabet,
    rng: &mut R,
) -> Result<ActiveSet> {
    if config.num_active > config.num_users {
        return Err(Error::TooMany {
            what: "active users",
            requested: config.num_active,
            available: config.num_users,
        });
    }
    let mut indices = rand::seq::index::sample(rng, config.num_users, config.num_active).into_vec();
    indices.sort_unstable();
    let symbols = indices
        .iter()
        .map(|_| alphabet.points()[rng.random_range(0..alphabet.len())])
        .collect();
    Ok(ActiveSet { indices, symbols })
}

/// y = Σ_{i active} |h_i| b_i s_i.
pub fn clean_mixture(
    codes: &SpreadingMatrix,
    channel: &ChannelRealization,
    active: &ActiveSet,
) -> Vec<Complex64> {
    let mut y = vec![Complex64::new(0.0, 0.0); codes.spreading_factor()];
    for (user, symbol) in active.iter() {
        let weight = symbol * channel.magnitudes[user];
        for (acc, c) in y.iter_mut().zip(codes.column(user)) {
            *acc += c * weight;
        }
    }
    y
}

/// Circularly symmetric complex Gaussian noise with per-chip variance
/// `variance`, split evenly between the real and imaginary parts.
pub fn draw_awgn<R: Rng + ?Sized>(variance: f64, len: usize, rng: &mut R) -> Vec<Complex64> {
    let std = (variance / 2.0).sqrt();
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * std, im * std)
        })
        .collect()
}

/// Draws channel, activity, jammer and noise (in that order) and assembles
/// r = y + z + v.
pub fn generate_scenario<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    codes: &SpreadingMatrix,
    alphabet: &SymbolAlphabet,
    rng: &mut R,
) -> Result<ScenarioRealization> {
    config.validate()?;
    if codes.spreading_factor() != config.spreading_factor || codes.num_users() != config.num_users
    {
        return Err(Error::shape(
            "scenario codes",
            format!("{}x{}", config.spreading_factor, config.num_users),
            format!("{}x{}", codes.spreading_factor(), codes.num_users()),
        ));
    }
    let s = config.spreading_factor;
    let channel = draw_channel(config, rng);
    let active = draw_active_set(config, alphabet, rng)?;
    let clean = clean_mixture(codes, &channel, &active);
    let jammer = draw_jammer(&config.jammer_config(), s, rng)?;
    let noise = draw_awgn(config.noise_variance(), s, rng);
    let received = clean
        .iter()
        .zip(&jammer.chips)
        .zip(&noise)
        .map(|((y, z), v)| y + z + v)
        .collect();
    Ok(ScenarioRealization {
        active,
        channel,
        clean,
        jammer,
        noise,
        received,
    })
}
