//! Multi-resolution token layouts.
//!
//! Next-scale-prediction models emit K scales, scale i consisting of rᵢ
//! tokens of m bits each. Watermark counting never crosses a token
//! boundary, so each token contributes k = m − (n−1) windows; the schedule
//! owns that arithmetic.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("schedule needs at least one scale")]
    NoScales,
    #[error("scale {0} has zero tokens")]
    EmptyScale(usize),
    #[error("bits per token must be in 1..=255, got {0}")]
    BadTokenWidth(usize),
    #[error("window length {n} exceeds token width {m}; no window fits inside a token")]
    WindowWiderThanToken { n: usize, m: usize },
}

/// Token counts per scale plus the shared token width in bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleSchedule {
    tokens_per_scale: Vec<u32>,
    m: usize,
}

impl ScaleSchedule {
    pub fn new(tokens_per_scale: Vec<u32>, m: usize) -> Result<Self, ScheduleError> {
        if tokens_per_scale.is_empty() {
            return Err(ScheduleError::NoScales);
        }
        if let Some(i) = tokens_per_scale.iter().position(|&r| r == 0) {
            return Err(ScheduleError::EmptyScale(i));
        }
        // The stream file header stores m in one byte.
        if m == 0 || m > 255 {
            return Err(ScheduleError::BadTokenWidth(m));
        }
        Ok(Self { tokens_per_scale, m })
    }

    /// The 13-scale 1:1 aspect-ratio schedule of the Infinity-2B tokenizer
    /// with 32-bit tokens: 10,521 tokens, 336,672 bits.
    pub fn infinity_2b() -> Self {
        Self::new(
            vec![1, 4, 16, 36, 64, 144, 256, 400, 576, 1024, 1600, 2304, 4096],
            32,
        )
        .expect("static schedule")
    }

    /// Single-scale layout, e.g. Instella-style 128 tokens of 32 bits.
    pub fn single_scale(r: u32, m: usize) -> Result<Self, ScheduleError> {
        Self::new(vec![r], m)
    }

    pub fn num_scales(&self) -> usize {
        self.tokens_per_scale.len()
    }

    pub fn tokens_per_scale(&self) -> &[u32] {
        &self.tokens_per_scale
    }

    pub fn tokens_in_scale(&self, scale: usize) -> u32 {
        self.tokens_per_scale[scale]
    }

    /// Bits per token, m.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn bits_in_scale(&self, scale: usize) -> u64 {
        self.tokens_per_scale[scale] as u64 * self.m as u64
    }

    pub fn total_tokens(&self) -> u64 {
        self.tokens_per_scale.iter().map(|&r| r as u64).sum()
    }

    pub fn total_bits(&self) -> u64 {
        self.total_tokens() * self.m as u64
    }

    /// Windows per token for n-bit windows, k = m − (n−1).
    pub fn windows_per_token(&self, n: usize) -> Result<usize, ScheduleError> {
        if n == 0 || n > self.m {
            return Err(ScheduleError::WindowWiderThanToken { n, m: self.m });
        }
        Ok(self.m - (n - 1))
    }

    /// Total watermarkable windows T = Σᵢ rᵢ·k across all scales.
    pub fn watermarkable_bits(&self, n: usize) -> Result<u64, ScheduleError> {
        let k = self.windows_per_token(n)? as u64;
        Ok(self.total_tokens() * k)
    }
}
