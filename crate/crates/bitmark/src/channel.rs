//! Degradation channels: per-scale binary symmetric noise and the
//! adaptive green-window flipping attack.
//!
//! Decode/re-encode loss and conventional image corruptions are modeled
//! as independent per-scale bit flips. The flipping attack is the
//! informed adversary: it estimates the green excess per scale and flips
//! the closing bit of green windows with probability proportional to
//! that excess.

use crate::detect::{count_green, DetectError};
use crate::partition::Partition;
use crate::stream::BitStream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Per-scale bit-flip rates of the default 13-scale re-encoding channel:
/// the fraction of bits that change when a generated stream is decoded
/// and re-encoded, coarsest scale first.
pub const REENCODE_INFINITY_2B: [f64; 13] = [
    0.068, 0.132, 0.145, 0.200, 0.226, 0.247, 0.239, 0.277, 0.279, 0.264, 0.319, 0.328, 0.212,
];

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("flip rate {rate} at scale {scale} outside [0, 0.5]")]
    BadRate { scale: usize, rate: f64 },
    #[error("{rates} flip rates configured for {scales} scales")]
    RateCountMismatch { rates: usize, scales: usize },
    #[error("flip factor {0} must be finite and nonnegative")]
    BadPhi(f64),
    #[error("green fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("green-fraction prediction needs a 2-bit parity partition")]
    NotParity,
    #[error("flipping attack needs an effective partition")]
    PartitionNotEffective,
    #[error(transparent)]
    Detect(#[from] DetectError),
}

/// Independent per-scale bit-flip noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub flip_rates: Vec<f64>,
    pub rng_seed: u64,
}

impl ChannelConfig {
    /// The same rate at every scale.
    pub fn uniform(rate: f64, num_scales: usize, rng_seed: u64) -> Self {
        Self {
            flip_rates: vec![rate; num_scales],
            rng_seed,
        }
    }
}

/// Flips each bit of scale i independently with probability
/// `flip_rates[i]`. Shape is preserved exactly; the output is
/// deterministic given the seed.
pub fn bsc_apply(stream: &BitStream, config: &ChannelConfig) -> Result<BitStream, ChannelError> {
    if config.flip_rates.len() != stream.num_scales() {
        return Err(ChannelError::RateCountMismatch {
            rates: config.flip_rates.len(),
            scales: stream.num_scales(),
        });
    }
    for (scale, &rate) in config.flip_rates.iter().enumerate() {
        if !(0.0..=0.5).contains(&rate) || rate.is_nan() {
            return Err(ChannelError::BadRate { scale, rate });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut out = stream.clone();
    for (scale, &rate) in config.flip_rates.iter().enumerate() {
        for bit in out.scale_mut(scale) {
            if rng.random::<f64>() < rate {
                *bit ^= 1;
            }
        }
    }
    Ok(out)
}

/// The default re-encoding channel for 13-scale streams. Streams with a
/// different scale count need an explicit `ChannelConfig`.
pub fn default_reencode(stream: &BitStream, rng_seed: u64) -> Result<BitStream, ChannelError> {
    if stream.num_scales() != REENCODE_INFINITY_2B.len() {
        return Err(ChannelError::RateCountMismatch {
            rates: REENCODE_INFINITY_2B.len(),
            scales: stream.num_scales(),
        });
    }
    bsc_apply(
        stream,
        &ChannelConfig {
            flip_rates: REENCODE_INFINITY_2B.to_vec(),
            rng_seed,
        },
    )
}

/// Predicts the green fraction after a BSC of rate ρ for 2-bit parity
/// partitions, where a window changes class iff exactly one of its two
/// bits flips: q = 2ρ(1−ρ), result = f(1−q) + (1−f)q.
///
/// Arranged as 0.5 + (f − 0.5)(1 − 2q) so that the fixed point at
/// f = 0.5 is exact for every ρ and the ρ = 0 identity is exact for
/// f ≥ 0.25.
pub fn expected_green_fraction_bsc(
    f: f64,
    rho: f64,
    partition: &Partition,
) -> Result<f64, ChannelError> {
    let greens = partition.green_values();
    if partition.n() != 2 || !(greens == [0b01, 0b10] || greens == [0b00, 0b11]) {
        return Err(ChannelError::NotParity);
    }
    if !(0.0..=1.0).contains(&f) || f.is_nan() {
        return Err(ChannelError::BadFraction(f));
    }
    if !(0.0..=0.5).contains(&rho) || rho.is_nan() {
        return Err(ChannelError::BadRate { scale: 0, rate: rho });
    }
    let q = 2.0 * rho * (1.0 - rho);
    Ok(0.5 + (f - 0.5) * (1.0 - 2.0 * q))
}

/// The adaptive attack configuration: flip factor φ, the partition the
/// adversary counts against, and the seed for the flip draws.
#[derive(Debug, Clone)]
pub struct FlipperConfig {
    pub phi: f64,
    pub partition: Partition,
    pub rng_seed: u64,
}

/// Per-scale flip probability: the green excess times φ, clamped to
/// [0, 1]. Fractions at or below 1/2 yield 0.
pub fn flip_probability(green_fraction: f64, phi: f64) -> Result<f64, ChannelError> {
    if !(0.0..=1.0).contains(&green_fraction) || green_fraction.is_nan() {
        return Err(ChannelError::BadFraction(green_fraction));
    }
    if !(phi >= 0.0 && phi.is_finite()) {
        return Err(ChannelError::BadPhi(phi));
    }
    Ok(((green_fraction - 0.5) * phi).clamp(0.0, 1.0))
}

/// Scans each scale's windows in order and flips the final bit of green
/// windows with the scale's excess-proportional probability. Flips feed
/// back into later windows (the scan sees updated bits), mirroring an
/// in-place adversary.
pub fn bit_flipper_attack(
    stream: &BitStream,
    config: &FlipperConfig,
) -> Result<BitStream, ChannelError> {
    if !config.partition.is_effective() {
        return Err(ChannelError::PartitionNotEffective);
    }
    let counts = count_green(stream, &config.partition)?;
    let n = config.partition.n();
    let m = stream.schedule().m();
    let mask = (1usize << n) - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut out = stream.clone();
    for (scale, sc) in counts.per_scale.iter().enumerate() {
        let p = flip_probability(sc.green as f64 / sc.total as f64, config.phi)?;
        for token in out.scale_mut(scale).chunks_exact_mut(m) {
            let mut w = 0usize;
            for j in 0..m {
                w = ((w << 1) | token[j] as usize) & mask;
                if j + 1 >= n && config.partition.is_green(w) && rng.random::<f64>() < p {
                    token[j] ^= 1;
                    w ^= 1;
                }
            }
        }
    }
    Ok(out)
}

/// Named rate presets for the BSC layer. The non-identity rates are
/// synthetic round numbers ordered weak to strong; they illustrate the
/// qualitative robustness ordering and are not calibrated measurements.
/// `reencode-infinity2b` uses the tabulated 13-scale re-encoding rates
/// and therefore requires exactly 13 scales.
pub fn preset_rates(name: &str, num_scales: usize) -> Option<Vec<f64>> {
    match name {
        "identity" => Some(vec![0.0; num_scales]),
        "noise-weak" => Some(vec![0.05; num_scales]),
        "jpeg" => Some(vec![0.08; num_scales]),
        "blur" => Some(vec![0.12; num_scales]),
        "noise-strong" => Some(vec![0.15; num_scales]),
        "reencode-infinity2b" if num_scales == REENCODE_INFINITY_2B.len() => {
            Some(REENCODE_INFINITY_2B.to_vec())
        }
        _ => None,
    }
}

/// Preset names in weak-to-strong order, for help text and sweeps.
pub const PRESET_NAMES: [&str; 6] = [
    "identity",
    "noise-weak",
    "jpeg",
    "blur",
    "noise-strong",
    "reencode-infinity2b",
];
