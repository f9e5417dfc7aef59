//! Watermark embedding: biased sampling over an abstract logit source.
//!
//! The generating model is hidden behind [`LogitSource`]; embedding walks
//! the schedule in generation order and, for every bit position where an
//! n-bit window ends inside the current token, adds δ to the logit of the
//! bit that would complete a green window (Eq. 1 form: softmax over
//! (ℓ^b + δ, ℓ^{¬b})). The first n−1 bits of each token are sampled with
//! the plain softmax so windows never span token boundaries.
//!
//! The sampling RNG consumes exactly one uniform draw per bit in a fixed
//! order, so δ=0 reproduces unwatermarked generation bit for bit with the
//! same seed and source.

use crate::partition::{Partition, PartitionError, PrefixGreens};
use crate::schedule::{ScaleSchedule, ScheduleError};
use crate::stream::BitStream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("logit {0} is not finite")]
    BadLogit(f64),
    #[error("delta {0} must be finite and non-negative")]
    BadDelta(f64),
    #[error("probabilities ({0}, {1}) are not a distribution")]
    InvalidDistribution(f64, f64),
    #[error("logit source exhausted at scale {scale} token {token} bit {bit}")]
    SourceExhausted {
        scale: usize,
        token: usize,
        bit: usize,
    },
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Position of the next bit in generation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitPosition {
    pub scale: usize,
    pub token: usize,
    pub bit: usize,
}

/// Abstract next-bit logit model.
///
/// Implementations are consulted strictly in generation order
/// (scale-major, token-major, bit-major). `context` holds the bits already
/// realized in the current scale, so sources may condition on history even
/// though the bundled synthetic source does not. Returning `None` signals
/// exhaustion and aborts embedding.
pub trait LogitSource {
    fn next_logits(&mut self, pos: BitPosition, context: &[u8]) -> Option<(f64, f64)>;
}

/// Embedding parameters: which partition to favor, how hard, and the
/// sampling seed.
#[derive(Debug, Clone)]
pub struct EmbedConfig {
    pub partition: Partition,
    pub delta: f64,
    pub rng_seed: u64,
}

#[inline]
pub(crate) fn binary_softmax(l0: f64, l1: f64) -> (f64, f64) {
    // Max-subtraction keeps exp() in [e^-inf, 1] for any finite logits.
    let m = l0.max(l1);
    let e0 = (l0 - m).exp();
    let e1 = (l1 - m).exp();
    let s = e0 + e1;
    (e0 / s, e1 / s)
}

#[inline]
fn biased_logits(l0: f64, l1: f64, greens: PrefixGreens, delta: f64) -> (f64, f64) {
    // Every green completion gets the bias. With exactly one green
    // completion this is Eq. 1; with zero or two the softmax is unchanged
    // (up to rounding), which is precisely how ineffective list choices
    // degrade in list-selection sweeps.
    match greens {
        PrefixGreens::OnlyZero => (l0 + delta, l1),
        PrefixGreens::OnlyOne => (l0, l1 + delta),
        PrefixGreens::Both => (l0 + delta, l1 + delta),
        PrefixGreens::Neither => (l0, l1),
    }
}

fn check_logits(l0: f64, l1: f64) -> Result<(), EmbedError> {
    if !l0.is_finite() {
        return Err(EmbedError::BadLogit(l0));
    }
    if !l1.is_finite() {
        return Err(EmbedError::BadLogit(l1));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<(), EmbedError> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(EmbedError::BadDelta(delta));
    }
    Ok(())
}

/// Biased next-bit distribution at one position.
///
/// `prefix` is the value of the n−1 bits preceding the position inside the
/// same token. Requires the partition to be effective at that prefix;
/// [`embed_stream`] itself is more permissive (see there).
pub fn bias_probability(
    logits: (f64, f64),
    prefix: u64,
    partition: &Partition,
    delta: f64,
) -> Result<(f64, f64), EmbedError> {
    check_logits(logits.0, logits.1)?;
    check_delta(delta)?;
    let green_bit = partition.green_completion(prefix)?;
    let greens = if green_bit == 0 {
        PrefixGreens::OnlyZero
    } else {
        PrefixGreens::OnlyOne
    };
    let (b0, b1) = biased_logits(logits.0, logits.1, greens, delta);
    Ok(binary_softmax(b0, b1))
}

/// Draws one bit from a binary distribution, consuming exactly one
/// uniform variate.
pub fn sample_bit<R: Rng + ?Sized>(
    probabilities: (f64, f64),
    rng: &mut R,
) -> Result<u8, EmbedError> {
    let (p0, p1) = probabilities;
    if !(p0 >= 0.0 && p1 >= 0.0 && (p0 + p1 - 1.0).abs() <= 1e-9) {
        return Err(EmbedError::InvalidDistribution(p0, p1));
    }
    Ok(u8::from(rng.random::<f64>() < p1))
}

/// Shared sampling loop. `bias: None` is unwatermarked generation;
/// `Some((partition, delta))` applies the green bias at every in-token
/// window end. Both paths draw one uniform per bit in the same order, so
/// they are bit-identical when δ=0.
pub(crate) fn sample_stream(
    source: &mut dyn LogitSource,
    schedule: &ScaleSchedule,
    bias: Option<(&Partition, f64)>,
    rng_seed: u64,
) -> Result<BitStream, EmbedError> {
    let (n, prefix_mask) = match bias {
        Some((partition, delta)) => {
            check_delta(delta)?;
            schedule.windows_per_token(partition.n())?;
            let n = partition.n();
            (n, if n > 1 { (1usize << (n - 1)) - 1 } else { 0 })
        }
        None => (0, 0),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let m = schedule.m();
    let mut scales = Vec::with_capacity(schedule.num_scales());
    for scale in 0..schedule.num_scales() {
        let tokens = schedule.tokens_in_scale(scale) as usize;
        let mut bits: Vec<u8> = Vec::with_capacity(tokens * m);
        for token in 0..tokens {
            let mut prefix: usize = 0;
            for bit in 0..m {
                let pos = BitPosition { scale, token, bit };
                let (l0, l1) = source
                    .next_logits(pos, &bits)
                    .ok_or(EmbedError::SourceExhausted { scale, token, bit })?;
                check_logits(l0, l1)?;
                let p1 = match bias {
                    Some((partition, delta)) if bit + 1 >= n => {
                        let greens = partition.prefix_greens_unchecked(prefix);
                        let (b0, b1) = biased_logits(l0, l1, greens, delta);
                        binary_softmax(b0, b1).1
                    }
                    _ => binary_softmax(l0, l1).1,
                };
                let b = u8::from(rng.random::<f64>() < p1);
                bits.push(b);
                // Rolling (n−1)-bit prefix; mask 0 pins the empty prefix
                // of n=1 partitions to index 0.
                if n > 0 {
                    prefix = ((prefix << 1) | b as usize) & prefix_mask;
                }
            }
        }
        scales.push(bits);
    }
    Ok(BitStream::new(schedule.clone(), scales).expect("loop emits exact layout"))
}

/// Embeds the watermark over a full schedule.
///
/// Ineffective partitions are accepted: wherever a prefix has zero or two
/// green completions the bias cancels inside the softmax and that position
/// is effectively unbiased. This is deliberate, so that list-choice sweeps
/// can measure how ineffective splits wash out, matching the CLI's
/// warn-but-run behavior.
pub fn embed_stream(
    source: &mut dyn LogitSource,
    schedule: &ScaleSchedule,
    config: &EmbedConfig,
) -> Result<BitStream, EmbedError> {
    sample_stream(
        source,
        schedule,
        Some((&config.partition, config.delta)),
        config.rng_seed,
    )
}

/// Single-scale convenience wrapper: r tokens of m bits.
pub fn embed_single_scale(
    source: &mut dyn LogitSource,
    r: u32,
    m: usize,
    config: &EmbedConfig,
) -> Result<BitStream, EmbedError> {
    let schedule = ScaleSchedule::single_scale(r, m)?;
    embed_stream(source, &schedule, config)
}
