//! Green-window counting and one-proportion z detection.
//!
//! Detection slides an n-bit window with stride 1 inside every token
//! (never across token or scale boundaries), counts windows landing in
//! the green set, and tests the count against the null that bits ignore
//! the partition: z = (C − γT)/√(Tγ(1−γ)). Counts are accumulated across
//! scales into a single statistic; per-scale pairs are reported alongside
//! for diagnostics and for the flipping attack.

use crate::partition::Partition;
use crate::schedule::ScheduleError;
use crate::stream::BitStream;
use thiserror::Error;

/// Default one-sided z threshold, the Gaussian 1%-FPR point. Empirical
/// calibration via `eval::threshold_at_fpr` is preferred when a negative
/// population is available.
pub const DEFAULT_Z_THRESHOLD: f64 = 2.326;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("no watermarkable windows (T = 0)")]
    NoWindows,
    #[error("green count {green} exceeds total {total}")]
    CountExceedsTotal { green: u64, total: u64 },
    #[error("gamma {0} must lie strictly between 0 and 1")]
    BadGamma(f64),
    #[error("threshold {0} must be finite")]
    BadThreshold(f64),
    #[error("tail probability {0} outside (0, 1)")]
    BadTailProbability(f64),
}

/// Green/total window counts for one scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaleCount {
    pub green: u64,
    pub total: u64,
}

/// Aggregate and per-scale green-window counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreenCount {
    pub green: u64,
    pub total: u64,
    pub per_scale: Vec<ScaleCount>,
}

/// Detection parameters.
#[derive(Debug, Clone)]
pub struct DetectConfig {
    pub partition: Partition,
    pub threshold: f64,
    pub two_sided: bool,
}

impl DetectConfig {
    pub fn new(partition: Partition) -> Self {
        Self {
            partition,
            threshold: DEFAULT_Z_THRESHOLD,
            two_sided: false,
        }
    }
}

/// Full detection outcome. `z = (green_count − γ·total)/√(total·γ(1−γ))`
/// holds exactly for the stored `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub green_count: u64,
    pub total: u64,
    pub green_fraction: f64,
    pub gamma: f64,
    pub z: f64,
    /// One-sided by default; two-sided when the config asked for it.
    pub p_value: f64,
    pub decision: bool,
    pub threshold_used: f64,
    pub per_scale: Vec<ScaleCount>,
}

/// Counts green windows, stride 1, within tokens only.
pub fn count_green(stream: &BitStream, partition: &Partition) -> Result<GreenCount, DetectError> {
    let n = partition.n();
    let schedule = stream.schedule();
    let k = schedule.windows_per_token(n)? as u64;
    let m = schedule.m();
    let mask = (1usize << n) - 1;

    let mut total_green = 0u64;
    let mut per_scale = Vec::with_capacity(stream.num_scales());
    for scale in 0..stream.num_scales() {
        let mut green = 0u64;
        for token in stream.scale(scale).chunks_exact(m) {
            let mut w = 0usize;
            for (j, &b) in token.iter().enumerate() {
                w = ((w << 1) | b as usize) & mask;
                if j + 1 >= n && partition.is_green(w) {
                    green += 1;
                }
            }
        }
        let total = schedule.tokens_in_scale(scale) as u64 * k;
        total_green += green;
        per_scale.push(ScaleCount { green, total });
    }
    Ok(GreenCount {
        green: total_green,
        total: per_scale.iter().map(|s| s.total).sum(),
        per_scale,
    })
}

/// The test statistic z = (C − γT)/√(Tγ(1−γ)).
pub fn z_score(green_count: u64, total: u64, gamma: f64) -> Result<f64, DetectError> {
    if total == 0 {
        return Err(DetectError::NoWindows);
    }
    if green_count > total {
        return Err(DetectError::CountExceedsTotal {
            green: green_count,
            total,
        });
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(DetectError::BadGamma(gamma));
    }
    let t = total as f64;
    let c = green_count as f64;
    Ok((c - gamma * t) / (t * gamma * (1.0 - gamma)).sqrt())
}

/// Gaussian tail probability of the statistic: P(Z > z) one-sided,
/// P(|Z| > |z|) two-sided. Computed through the complementary error
/// function, accurate to better than 1e−12 relative for |z| ≤ 8.
pub fn p_value(z: f64, two_sided: bool) -> f64 {
    let sqrt2 = std::f64::consts::SQRT_2;
    if two_sided {
        libm::erfc(z.abs() / sqrt2)
    } else {
        0.5 * libm::erfc(z / sqrt2)
    }
}

/// Upper-tail Gaussian quantile: the z with P(Z > z) = tail. Inverted
/// from the tail function by bisection, good to about 1e−10.
pub fn gaussian_upper_quantile(tail: f64) -> Result<f64, DetectError> {
    if !(tail > 0.0 && tail < 1.0) {
        return Err(DetectError::BadTailProbability(tail));
    }
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if p_value(mid, false) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Counts, scores, and thresholds a stream in one call.
pub fn detect(stream: &BitStream, config: &DetectConfig) -> Result<DetectionResult, DetectError> {
    if !config.threshold.is_finite() {
        return Err(DetectError::BadThreshold(config.threshold));
    }
    let counts = count_green(stream, &config.partition)?;
    let gamma = config.partition.gamma();
    let z = z_score(counts.green, counts.total, gamma)?;
    let p = p_value(z, config.two_sided);
    let decision = if config.two_sided {
        z.abs() > config.threshold
    } else {
        z > config.threshold
    };
    Ok(DetectionResult {
        green_count: counts.green,
        total: counts.total,
        green_fraction: counts.green as f64 / counts.total as f64,
        gamma,
        z,
        p_value: p,
        decision,
        threshold_used: config.threshold,
        per_scale: counts.per_scale,
    })
}
