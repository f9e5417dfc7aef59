//! Synthetic autoregressive logit source with per-scale entropy
//! calibration.
//!
//! Real next-scale image tokenizers emit low-entropy bits whose mean
//! normalized entropy varies by scale. This module reproduces that one
//! statistic with a memoryless model: per bit, a logit gap g ~ N(0, σᵢ²)
//! with a uniform random sign, emitted as the pair (0, ±g). σᵢ is
//! calibrated by Monte Carlo bisection so the mean binary entropy of
//! softmax(0, ±g) hits a per-scale target.

use crate::embed::{binary_softmax, BitPosition, EmbedError, LogitSource};
use crate::schedule::ScaleSchedule;
use crate::stream::BitStream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Per-scale mean normalized entropy of the default 13-scale source,
/// lowest (coarsest) scale first.
pub const INFINITY_2B_ENTROPY: [f64; 13] = [
    0.051, 0.108, 0.133, 0.178, 0.202, 0.215, 0.223, 0.223, 0.226, 0.243, 0.237, 0.233, 0.234,
];

/// Upper end of the σ bisection bracket.
pub const MAX_SIGMA: f64 = 100.0;

/// Monte Carlo batch size used during calibration.
pub const CALIBRATION_SAMPLES: usize = 100_000;

/// Fixed seed for the calibration batch (common random numbers), so the
/// calibrated σ is a deterministic function of the target alone.
const CALIBRATION_SEED: u64 = 0x656e74_726f7079;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("entropy target {0} outside (0, 1]")]
    BadTarget(f64),
    #[error("tolerance {0} must be finite and positive")]
    BadTolerance(f64),
    #[error("entropy target {target} unattainable with sigma in [0, {max_sigma}]")]
    Unattainable { target: f64, max_sigma: f64 },
    #[error("sigma {0} must be finite and nonnegative")]
    BadSigma(f64),
    #[error("stickiness {0} outside [0, 1]")]
    BadStickiness(f64),
    #[error("entropy profile is empty")]
    EmptyProfile,
    #[error("no sigmas configured")]
    EmptySigmas,
    #[error("profile line {line}: cannot parse {text:?} as a number")]
    ParseLine { line: usize, text: String },
}

/// Per-scale mean normalized binary entropy targets, each in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyProfile {
    targets: Vec<f64>,
}

impl EntropyProfile {
    pub fn new(targets: Vec<f64>) -> Result<Self, SynthError> {
        if targets.is_empty() {
            return Err(SynthError::EmptyProfile);
        }
        for &t in &targets {
            if !(0.0..=1.0).contains(&t) || t.is_nan() {
                return Err(SynthError::BadTarget(t));
            }
        }
        Ok(Self { targets })
    }

    /// The default 13-scale profile.
    pub fn infinity_2b() -> Self {
        Self::new(INFINITY_2B_ENTROPY.to_vec()).expect("constant profile is valid")
    }

    /// Parses one target per line. Blank lines and lines starting with
    /// `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self, SynthError> {
        let mut targets = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let value: f64 = line.parse().map_err(|_| SynthError::ParseLine {
                line: i + 1,
                text: line.to_string(),
            })?;
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(SynthError::BadTarget(value));
            }
            targets.push(value);
        }
        Self::new(targets)
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// H(p) in bits, with 0·log 0 = 0.
fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

fn mean_entropy(sigma: f64, gaps: &[f64]) -> f64 {
    let sum: f64 = gaps
        .iter()
        .map(|&g| binary_entropy(binary_softmax(0.0, sigma * g).1))
        .sum();
    sum / gaps.len() as f64
}

fn calibration_batch(seed: u64, samples: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(|_| rng.sample(StandardNormal)).collect()
}

/// Inverts the entropy of the gap model: finds σ whose Monte Carlo mean
/// entropy is within `tolerance` of the target. Bisection over
/// [0, MAX_SIGMA] on a fixed batch of normals; the mean is strictly
/// decreasing in σ, from 1 at σ=0 down to the batch floor at MAX_SIGMA.
pub fn calibrate_sigma(target_entropy: f64, tolerance: f64) -> Result<f64, SynthError> {
    if !(target_entropy > 0.0 && target_entropy <= 1.0) {
        return Err(SynthError::BadTarget(target_entropy));
    }
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(SynthError::BadTolerance(tolerance));
    }
    if target_entropy == 1.0 {
        // Zero gap means p = 1/2 exactly at every bit.
        return Ok(0.0);
    }
    let gaps = calibration_batch(CALIBRATION_SEED, CALIBRATION_SAMPLES);
    let unattainable = SynthError::Unattainable {
        target: target_entropy,
        max_sigma: MAX_SIGMA,
    };
    if mean_entropy(MAX_SIGMA, &gaps) > target_entropy + tolerance {
        return Err(unattainable);
    }
    let (mut lo, mut hi) = (0.0_f64, MAX_SIGMA);
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let e = mean_entropy(mid, &gaps);
        if (e - target_entropy).abs() <= 0.25 * tolerance || hi - lo < 1e-9 {
            break;
        }
        if e > target_entropy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (mean_entropy(mid, &gaps) - target_entropy).abs() <= tolerance {
        Ok(mid)
    } else {
        Err(unattainable)
    }
}

/// A calibrated source description: entropy targets, the σ per scale
/// realizing them, the generation seed, and an optional first-order
/// Markov stickiness (probability that a gap reuses the previous gap's
/// sign). Stickiness 0 is the memoryless default; nonzero values exist
/// for sensitivity studies only.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSourceConfig {
    pub profile: EntropyProfile,
    pub sigma_per_scale: Vec<f64>,
    pub seed: u64,
    pub stickiness: f64,
}

impl SynthSourceConfig {
    /// Calibrates every scale of the profile to tolerance 0.005.
    pub fn calibrated(profile: EntropyProfile, seed: u64) -> Result<Self, SynthError> {
        let sigma_per_scale = profile
            .targets()
            .iter()
            .map(|&t| calibrate_sigma(t, 0.005))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            profile,
            sigma_per_scale,
            seed,
            stickiness: 0.0,
        })
    }
}

/// The logit source: per bit draws a gap magnitude |N(0, σᵢ²)| and a
/// sign, and emits (0, ±gap). One normal plus one uniform per bit,
/// always in that order, so streams are reproducible from the seed.
#[derive(Debug, Clone)]
pub struct SynthSource {
    sigma_per_scale: Vec<f64>,
    stickiness: f64,
    rng: ChaCha8Rng,
    last_sign: f64,
}

pub fn make_source(config: &SynthSourceConfig) -> Result<SynthSource, SynthError> {
    if config.sigma_per_scale.is_empty() {
        return Err(SynthError::EmptySigmas);
    }
    for &s in &config.sigma_per_scale {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(SynthError::BadSigma(s));
        }
    }
    if !(0.0..=1.0).contains(&config.stickiness) || config.stickiness.is_nan() {
        return Err(SynthError::BadStickiness(config.stickiness));
    }
    Ok(SynthSource {
        sigma_per_scale: config.sigma_per_scale.clone(),
        stickiness: config.stickiness,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        last_sign: 1.0,
    })
}

impl LogitSource for SynthSource {
    fn next_logits(&mut self, pos: BitPosition, _context: &[u8]) -> Option<(f64, f64)> {
        let sigma = *self.sigma_per_scale.get(pos.scale)?;
        let magnitude: f64 = self.rng.sample::<f64, _>(StandardNormal).abs() * sigma;
        let u: f64 = self.rng.random();
        // One uniform serves both roles: below the stickiness it repeats
        // the previous sign, above it the rescaled remainder picks fresh.
        let sign = if u < self.stickiness {
            self.last_sign
        } else if (u - self.stickiness) / (1.0 - self.stickiness) < 0.5 {
            -1.0
        } else {
            1.0
        };
        self.last_sign = sign;
        Some((0.0, sign * magnitude))
    }
}

/// Unwatermarked generation: plain sequential softmax sampling.
pub fn generate_clean(
    source: &mut dyn LogitSource,
    schedule: &ScaleSchedule,
    seed: u64,
) -> Result<BitStream, EmbedError> {
    crate::embed::sample_stream(source, schedule, None, seed)
}
