//! Validated bit streams laid out by a scale schedule.
//!
//! Bits are stored unpacked, one byte per bit, because every consumer
//! walks them bit-by-bit anyway; packing only happens at the file-format
//! boundary.

use crate::schedule::ScaleSchedule;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StreamError {
    #[error("expected {expected} scales, got {got}")]
    ScaleCountMismatch { expected: usize, got: usize },
    #[error("scale {scale} holds {got} bits, schedule requires {expected}")]
    LengthMismatch {
        scale: usize,
        expected: u64,
        got: usize,
    },
    #[error("scale {scale} contains non-bit value {value} at index {index}")]
    NotABit { scale: usize, index: usize, value: u8 },
}

/// A full generation: one bit array per scale, scale i holding exactly
/// rᵢ·m bits valued 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    schedule: ScaleSchedule,
    scales: Vec<Vec<u8>>,
}

impl BitStream {
    pub fn new(schedule: ScaleSchedule, scales: Vec<Vec<u8>>) -> Result<Self, StreamError> {
        if scales.len() != schedule.num_scales() {
            return Err(StreamError::ScaleCountMismatch {
                expected: schedule.num_scales(),
                got: scales.len(),
            });
        }
        for (i, bits) in scales.iter().enumerate() {
            let expected = schedule.bits_in_scale(i);
            if bits.len() as u64 != expected {
                return Err(StreamError::LengthMismatch {
                    scale: i,
                    expected,
                    got: bits.len(),
                });
            }
            if let Some(index) = bits.iter().position(|&b| b > 1) {
                return Err(StreamError::NotABit {
                    scale: i,
                    index,
                    value: bits[index],
                });
            }
        }
        Ok(Self { schedule, scales })
    }

    pub fn schedule(&self) -> &ScaleSchedule {
        &self.schedule
    }

    pub fn num_scales(&self) -> usize {
        self.scales.len()
    }

    pub fn scale(&self, i: usize) -> &[u8] {
        &self.scales[i]
    }

    pub(crate) fn scale_mut(&mut self, i: usize) -> &mut [u8] {
        &mut self.scales[i]
    }

    /// Consumes the stream, returning the raw per-scale bit arrays.
    pub fn into_scales(self) -> Vec<Vec<u8>> {
        self.scales
    }

    pub fn total_bits(&self) -> u64 {
        self.schedule.total_bits()
    }
}
