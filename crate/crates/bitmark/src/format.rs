//! The BMK1 stream file format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes  "BMK1"
//! version 1 byte   = 1
//! n       1 byte   window width the stream was produced with
//! m       1 byte   bits per token
//! K       2 bytes  number of scales
//! tokens  K × 4 bytes  tokens per scale
//! payload per scale: ceil(tokens·m / 8) bytes, bits LSB-first within
//!         each byte, each scale zero-padded to a byte boundary
//! ```
//!
//! Padding bits must be zero and the payload length must match the
//! header exactly, so every valid stream has one canonical encoding and
//! files can be compared byte-for-byte.

use crate::schedule::{ScaleSchedule, ScheduleError};
use crate::stream::{BitStream, StreamError};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"BMK1";
pub const VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {0:02x?}, expected \"BMK1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("file truncated: need {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("{0} trailing bytes after the payload")]
    TrailingData(usize),
    #[error("nonzero padding bits in scale {0}")]
    NonzeroPadding(usize),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

/// A decoded file: the stream plus the window width recorded at write
/// time (informational; detection may use any partition).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamFile {
    pub n: u8,
    pub stream: BitStream,
}

fn scale_payload_len(tokens: u32, m: usize) -> usize {
    (tokens as usize * m).div_ceil(8)
}

/// Encodes a stream to the canonical byte form.
pub fn write_stream(stream: &BitStream, n: u8) -> Vec<u8> {
    let schedule = stream.schedule();
    let m = schedule.m();
    let mut out = Vec::with_capacity(
        9 + 4 * schedule.num_scales()
            + (0..schedule.num_scales())
                .map(|s| scale_payload_len(schedule.tokens_in_scale(s), m))
                .sum::<usize>(),
    );
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(n);
    out.push(m as u8);
    out.extend_from_slice(&(schedule.num_scales() as u16).to_le_bytes());
    for s in 0..schedule.num_scales() {
        out.extend_from_slice(&schedule.tokens_in_scale(s).to_le_bytes());
    }
    for s in 0..schedule.num_scales() {
        let bits = stream.scale(s);
        let mut packed = vec![0u8; scale_payload_len(schedule.tokens_in_scale(s), m)];
        for (j, &bit) in bits.iter().enumerate() {
            packed[j / 8] |= bit << (j % 8);
        }
        out.extend_from_slice(&packed);
    }
    out
}

/// Decodes and fully validates a BMK1 byte slice.
pub fn read_stream(bytes: &[u8]) -> Result<StreamFile, FormatError> {
    let need = |needed: usize| -> Result<(), FormatError> {
        if bytes.len() < needed {
            Err(FormatError::Truncated {
                needed,
                found: bytes.len(),
            })
        } else {
            Ok(())
        }
    };
    need(9)?;
    let magic: [u8; 4] = bytes[0..4].try_into().expect("length checked");
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    if bytes[4] != VERSION {
        return Err(FormatError::BadVersion(bytes[4]));
    }
    let n = bytes[5];
    let m = bytes[6] as usize;
    let k = u16::from_le_bytes(bytes[7..9].try_into().expect("length checked")) as usize;
    let header_len = 9 + 4 * k;
    need(header_len)?;
    let tokens_per_scale: Vec<u32> = (0..k)
        .map(|i| {
            let at = 9 + 4 * i;
            u32::from_le_bytes(bytes[at..at + 4].try_into().expect("length checked"))
        })
        .collect();
    let schedule = ScaleSchedule::new(tokens_per_scale, m)?;

    let payload_len: usize = (0..k)
        .map(|s| scale_payload_len(schedule.tokens_in_scale(s), m))
        .sum();
    need(header_len + payload_len)?;
    if bytes.len() > header_len + payload_len {
        return Err(FormatError::TrailingData(
            bytes.len() - header_len - payload_len,
        ));
    }

    let mut scales = Vec::with_capacity(k);
    let mut at = header_len;
    for s in 0..k {
        let bit_count = schedule.tokens_in_scale(s) as usize * m;
        let byte_count = scale_payload_len(schedule.tokens_in_scale(s), m);
        let packed = &bytes[at..at + byte_count];
        at += byte_count;
        let bits: Vec<u8> = (0..bit_count)
            .map(|j| (packed[j / 8] >> (j % 8)) & 1)
            .collect();
        // Canonical form: bits past the stream must be zero.
        let padding_clean = (bit_count..byte_count * 8).all(|j| (packed[j / 8] >> (j % 8)) & 1 == 0);
        if !padding_clean {
            return Err(FormatError::NonzeroPadding(s));
        }
        scales.push(bits);
    }
    Ok(StreamFile {
        n,
        stream: BitStream::new(schedule, scales)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_stream() -> BitStream {
        let schedule = ScaleSchedule::new(vec![2, 1], 3).unwrap();
        BitStream::new(schedule, vec![vec![0, 1, 1, 1, 0, 1], vec![1, 0, 0]]).unwrap()
    }

    #[test]
    fn golden_encoding() {
        let bytes = write_stream(&sample_stream(), 2);
        let expected = [
            b'B', b'M', b'K', b'1', // magic
            1,    // version
            2,    // n
            3,    // m
            2, 0, // K = 2
            2, 0, 0, 0, // scale 0: 2 tokens
            1, 0, 0, 0, // scale 1: 1 token
            0x2e, // bits 0,1,1,1,0,1 LSB-first
            0x01, // bits 1,0,0
        ];
        assert_eq!(bytes, expected);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let stream = sample_stream();
        let file = read_stream(&write_stream(&stream, 5)).unwrap();
        assert_eq!(file.n, 5);
        assert_eq!(file.stream, stream);
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let mut bytes = write_stream(&sample_stream(), 2);
        bytes[0] = b'X';
        assert!(matches!(
            read_stream(&bytes),
            Err(FormatError::BadMagic(m)) if m == [b'X', b'M', b'K', b'1']
        ));
        let mut bytes = write_stream(&sample_stream(), 2);
        bytes[4] = 9;
        assert!(matches!(read_stream(&bytes), Err(FormatError::BadVersion(9))));
    }

    #[test]
    fn rejects_truncation_everywhere() {
        let bytes = write_stream(&sample_stream(), 2);
        for len in 0..bytes.len() {
            assert!(
                matches!(read_stream(&bytes[..len]), Err(FormatError::Truncated { .. })),
                "prefix of {len} bytes must be a truncation error"
            );
        }
    }

    #[test]
    fn rejects_trailing_data() {
        let mut bytes = write_stream(&sample_stream(), 2);
        bytes.push(0);
        assert!(matches!(read_stream(&bytes), Err(FormatError::TrailingData(1))));
    }

    #[test]
    fn rejects_nonzero_padding() {
        // Scale 0 occupies 6 of 8 bits in its byte; set a padding bit.
        let mut bytes = write_stream(&sample_stream(), 2);
        let payload_at = bytes.len() - 2;
        bytes[payload_at] |= 1 << 6;
        assert!(matches!(
            read_stream(&bytes),
            Err(FormatError::NonzeroPadding(0))
        ));
        // Same for the final scale: 3 of 8 bits used.
        let mut bytes = write_stream(&sample_stream(), 2);
        let last = bytes.len() - 1;
        bytes[last] |= 1 << 7;
        assert!(matches!(
            read_stream(&bytes),
            Err(FormatError::NonzeroPadding(1))
        ));
    }

    #[test]
    fn rejects_invalid_schedule_in_header() {
        // K = 0 and m = 0 both fail schedule validation.
        let mut bytes = write_stream(&sample_stream(), 2);
        bytes[7] = 0;
        bytes.truncate(9);
        assert!(matches!(read_stream(&bytes), Err(FormatError::Schedule(_))));
        let mut bytes = write_stream(&sample_stream(), 2);
        bytes[6] = 0;
        assert!(matches!(read_stream(&bytes), Err(FormatError::Schedule(_))));
    }

    #[test]
    fn byte_identical_encodings_for_equal_streams() {
        let a = write_stream(&sample_stream(), 2);
        let b = write_stream(&sample_stream(), 2);
        assert_eq!(a, b);
    }
}
