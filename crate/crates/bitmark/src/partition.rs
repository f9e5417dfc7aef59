//! Green/red partitions of n-bit windows.
//!
//! A partition splits all 2ⁿ possible n-bit windows into a green set and
//! its red complement. Embedding pushes generation toward green windows;
//! detection counts them. The bias is only well-defined when every
//! (n−1)-bit prefix has exactly one green completion, so that at each
//! position there is an unambiguous bit to favor. Partitions satisfying
//! that are called *effective*; the flag is computed at construction.

use thiserror::Error;

/// Upper bound on the window length. The lookup tables are dense
/// (2ⁿ entries), so this caps memory rather than expressing any
/// statistical limit.
pub const MAX_SEQUENCE_LEN: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("window length {0} outside supported range 1..={MAX_SEQUENCE_LEN}")]
    BadSequenceLength(usize),
    #[error("green list has {got} values; a balanced split of {n}-bit windows needs {expected}")]
    SizeMismatch { n: usize, expected: usize, got: usize },
    #[error("value {value:#b} does not fit in {n} bits")]
    ValueOutOfRange { value: u64, n: usize },
    #[error("duplicate green value {value:#b}")]
    DuplicateValue { value: u64 },
    #[error("green set must be a non-empty proper subset of all {n}-bit values")]
    DegenerateSplit { n: usize },
    #[error("window {value:#b} does not fit in {n} bits")]
    WindowOutOfRange { value: u64, n: usize },
    #[error("prefix {prefix:#b} has {greens} green completions; the bias needs exactly one")]
    IneffectivePrefix { prefix: u64, greens: usize },
    #[error("cannot parse green list entry {0:?}: expected a string of 0s and 1s")]
    Parse(String),
    #[error("green list entries have mixed lengths ({0} vs {1})")]
    MixedLengths(usize, usize),
    #[error("empty green list")]
    Empty,
}

/// Classification of a single window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitClass {
    Green,
    Red,
}

/// Which completions of an (n−1)-bit prefix fall in the green set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefixGreens {
    /// Only `prefix∥0` is green.
    OnlyZero,
    /// Only `prefix∥1` is green.
    OnlyOne,
    /// Both completions are green; adding δ to both logits cancels out.
    Both,
    /// Neither completion is green; there is nothing to bias toward.
    Neither,
}

impl PrefixGreens {
    fn count(self) -> usize {
        match self {
            PrefixGreens::OnlyZero | PrefixGreens::OnlyOne => 1,
            PrefixGreens::Both => 2,
            PrefixGreens::Neither => 0,
        }
    }
}

/// A green/red split of all n-bit windows, with the per-prefix completion
/// table precomputed for embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    n: usize,
    green: Vec<bool>,
    green_count: usize,
    completions: Vec<PrefixGreens>,
    effective: bool,
}

impl Partition {
    /// Builds a balanced partition: exactly half of all windows green.
    pub fn balanced(n: usize, green_values: &[u64]) -> Result<Self, PartitionError> {
        let p = Self::relaxed(n, green_values)?;
        let expected = 1usize << (n - 1);
        if p.green_count != expected {
            return Err(PartitionError::SizeMismatch {
                n,
                expected,
                got: p.green_count,
            });
        }
        Ok(p)
    }

    /// Builds a partition from any non-empty proper subset of windows.
    /// Unbalanced splits are legal here but flagged by [`Partition::advisory`].
    pub fn relaxed(n: usize, green_values: &[u64]) -> Result<Self, PartitionError> {
        if n == 0 || n > MAX_SEQUENCE_LEN {
            return Err(PartitionError::BadSequenceLength(n));
        }
        let size = 1usize << n;
        let mut green = vec![false; size];
        for &v in green_values {
            if v >= size as u64 {
                return Err(PartitionError::ValueOutOfRange { value: v, n });
            }
            if green[v as usize] {
                return Err(PartitionError::DuplicateValue { value: v });
            }
            green[v as usize] = true;
        }
        let green_count = green_values.len();
        if green_count == 0 || green_count == size {
            return Err(PartitionError::DegenerateSplit { n });
        }
        Ok(Self::from_table(n, green, green_count))
    }

    /// Derives an effective balanced partition from a key: for every
    /// (n−1)-bit prefix a pseudorandom function of (key, n, prefix) picks
    /// which completion is green. Same key, same partition; different keys
    /// disagree on roughly half the prefixes.
    pub fn keyed(key: &[u8], n: usize) -> Result<Self, PartitionError> {
        use sha2::{Digest, Sha256};
        if n == 0 || n > MAX_SEQUENCE_LEN {
            return Err(PartitionError::BadSequenceLength(n));
        }
        let size = 1usize << n;
        let mut green = vec![false; size];
        for prefix in 0..(size >> 1) as u64 {
            let mut h = Sha256::new();
            h.update((key.len() as u64).to_le_bytes());
            h.update(key);
            h.update([n as u8]);
            h.update(prefix.to_le_bytes());
            let digest = h.finalize();
            let bit = (digest[0] & 1) as u64;
            green[((prefix << 1) | bit) as usize] = true;
        }
        let green_count = size >> 1;
        Ok(Self::from_table(n, green, green_count))
    }

    /// The split used throughout the source experiments: G = {01, 10},
    /// i.e. a window is green when its two bits differ.
    pub fn odd_parity() -> Self {
        Self::balanced(2, &[0b01, 0b10]).expect("static green list")
    }

    /// The complementary two-bit split G = {00, 11}.
    pub fn even_parity() -> Self {
        Self::balanced(2, &[0b00, 0b11]).expect("static green list")
    }

    /// Parses a comma- or whitespace-separated list of equal-length binary
    /// strings, e.g. `"01,10"`. The entry length fixes n.
    pub fn parse_green_list(text: &str) -> Result<Self, PartitionError> {
        let mut n = None;
        let mut values = Vec::new();
        for entry in text.split([',', ' ']).filter(|e| !e.is_empty()) {
            if entry.bytes().any(|b| b != b'0' && b != b'1') {
                return Err(PartitionError::Parse(entry.to_string()));
            }
            match n {
                None => n = Some(entry.len()),
                Some(len) if len != entry.len() => {
                    return Err(PartitionError::MixedLengths(len, entry.len()))
                }
                _ => {}
            }
            let mut v = 0u64;
            for b in entry.bytes() {
                v = (v << 1) | (b - b'0') as u64;
            }
            values.push(v);
        }
        let n = n.ok_or(PartitionError::Empty)?;
        Self::relaxed(n, &values)
    }

    fn from_table(n: usize, green: Vec<bool>, green_count: usize) -> Self {
        let prefixes = 1usize << (n - 1);
        let mut completions = Vec::with_capacity(prefixes);
        let mut effective = true;
        for prefix in 0..prefixes {
            let zero = green[prefix << 1];
            let one = green[(prefix << 1) | 1];
            let c = match (zero, one) {
                (true, false) => PrefixGreens::OnlyZero,
                (false, true) => PrefixGreens::OnlyOne,
                (true, true) => PrefixGreens::Both,
                (false, false) => PrefixGreens::Neither,
            };
            effective &= c.count() == 1;
            completions.push(c);
        }
        Partition {
            n,
            green,
            green_count,
            completions,
            effective,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of distinct windows, 2ⁿ.
    pub fn num_windows(&self) -> u64 {
        1u64 << self.n
    }

    pub fn green_count(&self) -> usize {
        self.green_count
    }

    /// Fraction of all windows that are green, γ = |G| / 2ⁿ.
    pub fn gamma(&self) -> f64 {
        self.green_count as f64 / (1u64 << self.n) as f64
    }

    /// True when every (n−1)-bit prefix has exactly one green completion.
    pub fn is_effective(&self) -> bool {
        self.effective
    }

    /// A human-readable warning for constructions that are legal but
    /// statistically suspect, or `None` for the ordinary case.
    pub fn advisory(&self) -> Option<&'static str> {
        if self.n == 1 {
            Some("unary bias: single-bit windows push every position toward the same bit value")
        } else if !self.effective {
            Some("ineffective partition: some prefixes have zero or two green completions, so the bias is a no-op there")
        } else if self.green_count * 2 != self.green.len() {
            Some("unbalanced split: gamma differs from 0.5")
        } else {
            None
        }
    }

    /// Classifies one window value.
    pub fn classify(&self, window: u64) -> Result<BitClass, PartitionError> {
        if window >= self.num_windows() {
            return Err(PartitionError::WindowOutOfRange {
                value: window,
                n: self.n,
            });
        }
        Ok(if self.green[window as usize] {
            BitClass::Green
        } else {
            BitClass::Red
        })
    }

    /// Unchecked green lookup for hot loops; `window` must be < 2ⁿ.
    #[inline]
    pub(crate) fn is_green(&self, window: usize) -> bool {
        debug_assert!(window < self.green.len());
        self.green[window]
    }

    /// The green completion structure of one (n−1)-bit prefix.
    pub fn prefix_greens(&self, prefix: u64) -> Result<PrefixGreens, PartitionError> {
        if prefix >= (1u64 << (self.n - 1)) {
            return Err(PartitionError::WindowOutOfRange {
                value: prefix,
                n: self.n - 1,
            });
        }
        Ok(self.completions[prefix as usize])
    }

    #[inline]
    pub(crate) fn prefix_greens_unchecked(&self, prefix: usize) -> PrefixGreens {
        debug_assert!(prefix < self.completions.len());
        self.completions[prefix]
    }

    /// The unique green completion bit for a prefix, or an error when the
    /// partition is not effective there.
    pub fn green_completion(&self, prefix: u64) -> Result<u8, PartitionError> {
        match self.prefix_greens(prefix)? {
            PrefixGreens::OnlyZero => Ok(0),
            PrefixGreens::OnlyOne => Ok(1),
            other => Err(PartitionError::IneffectivePrefix {
                prefix,
                greens: other.count(),
            }),
        }
    }

    /// Green window values in ascending order.
    pub fn green_values(&self) -> Vec<u64> {
        (0..self.num_windows())
            .filter(|&w| self.green[w as usize])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn odd_parity_layout() {
        let p = Partition::odd_parity();
        assert_eq!(p.n(), 2);
        assert_eq!(p.gamma(), 0.5);
        assert!(p.is_effective());
        assert_eq!(p.advisory(), None);
        assert_eq!(p.green_values(), vec![0b01, 0b10]);
        assert_eq!(p.classify(0b01).unwrap(), BitClass::Green);
        assert_eq!(p.classify(0b10).unwrap(), BitClass::Green);
        assert_eq!(p.classify(0b00).unwrap(), BitClass::Red);
        assert_eq!(p.classify(0b11).unwrap(), BitClass::Red);
        // Green completion always differs from the prefix bit.
        assert_eq!(p.green_completion(0).unwrap(), 1);
        assert_eq!(p.green_completion(1).unwrap(), 0);
    }

    #[test]
    fn even_parity_is_effective_too() {
        let p = Partition::even_parity();
        assert!(p.is_effective());
        assert_eq!(p.green_completion(0).unwrap(), 0);
        assert_eq!(p.green_completion(1).unwrap(), 1);
    }

    #[test]
    fn shared_prefix_split_is_ineffective() {
        // {00, 01}: prefix 0 has two green completions, prefix 1 none.
        let p = Partition::balanced(2, &[0b00, 0b01]).unwrap();
        assert!(!p.is_effective());
        assert_eq!(p.prefix_greens(0).unwrap(), PrefixGreens::Both);
        assert_eq!(p.prefix_greens(1).unwrap(), PrefixGreens::Neither);
        assert!(matches!(
            p.green_completion(0),
            Err(PartitionError::IneffectivePrefix { greens: 2, .. })
        ));
        assert!(p.advisory().unwrap().contains("ineffective"));
    }

    #[test]
    fn unary_partition_carries_advisory() {
        let p = Partition::balanced(1, &[0]).unwrap();
        assert!(p.is_effective(), "structurally one green completion of the empty prefix");
        assert!(p.advisory().unwrap().contains("unary"));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            Partition::balanced(2, &[0b01]),
            Err(PartitionError::SizeMismatch {
                expected: 2,
                got: 1,
                ..
            })
        ));
        assert!(matches!(
            Partition::balanced(2, &[0b100, 0b01]),
            Err(PartitionError::ValueOutOfRange { value: 0b100, .. })
        ));
        assert!(matches!(
            Partition::relaxed(2, &[0b01, 0b01]),
            Err(PartitionError::DuplicateValue { value: 0b01 })
        ));
        assert!(matches!(
            Partition::relaxed(2, &[0, 1, 2, 3]),
            Err(PartitionError::DegenerateSplit { n: 2 })
        ));
        assert!(matches!(
            Partition::relaxed(2, &[]),
            Err(PartitionError::DegenerateSplit { n: 2 })
        ));
        assert!(matches!(
            Partition::relaxed(0, &[0]),
            Err(PartitionError::BadSequenceLength(0))
        ));
        assert!(matches!(
            Partition::odd_parity().classify(4),
            Err(PartitionError::WindowOutOfRange { value: 4, n: 2 })
        ));
    }

    #[test]
    fn parse_green_list_round_trip() {
        let p = Partition::parse_green_list("01,10").unwrap();
        assert_eq!(p, Partition::odd_parity());
        let p = Partition::parse_green_list("001 010 100 111").unwrap();
        assert_eq!(p.n(), 3);
        assert_eq!(p.gamma(), 0.5);
        assert!(matches!(
            Partition::parse_green_list("01,2"),
            Err(PartitionError::Parse(_))
        ));
        assert!(matches!(
            Partition::parse_green_list("01,100"),
            Err(PartitionError::MixedLengths(2, 3))
        ));
        assert!(matches!(
            Partition::parse_green_list(""),
            Err(PartitionError::Empty)
        ));
    }

    #[test]
    fn keyed_partition_is_deterministic_and_effective() {
        let a = Partition::keyed(b"key-0", 2).unwrap();
        let b = Partition::keyed(b"key-0", 2).unwrap();
        assert_eq!(a, b);
        assert!(a.is_effective());
        assert_eq!(a.gamma(), 0.5);
    }

    /// Oracle: two keyed partitions differ iff their green tables differ.
    /// At n=2 each partition is decided by 2 pseudorandom bits, so a random
    /// pair collides with probability 1/4; at n=8 collisions need 128 bits
    /// to agree and never happen in practice.
    #[test]
    fn keyed_partition_varies_with_key() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6b65795f70616972);
        let mut differing_n2 = 0;
        let mut differing_n8 = 0;
        for _ in 0..64 {
            let k0: [u8; 16] = rng.random();
            let k1: [u8; 16] = rng.random();
            if Partition::keyed(&k0, 2).unwrap() != Partition::keyed(&k1, 2).unwrap() {
                differing_n2 += 1;
            }
            if Partition::keyed(&k0, 8).unwrap() != Partition::keyed(&k1, 8).unwrap() {
                differing_n8 += 1;
            }
        }
        // Frozen for this seed; the binomial(64, 3/4) mean is 48.
        assert_eq!(differing_n2, 49);
        assert_eq!(differing_n8, 64);
    }

    #[test]
    fn keyed_partition_covers_every_prefix_once() {
        for n in 1..=8 {
            let p = Partition::keyed(b"coverage", n).unwrap();
            assert!(p.is_effective());
            assert_eq!(p.green_count(), 1 << (n - 1));
            for prefix in 0..(1u64 << (n - 1)) {
                let bit = p.green_completion(prefix).unwrap();
                assert_eq!(
                    p.classify((prefix << 1) | bit as u64).unwrap(),
                    BitClass::Green
                );
                assert_eq!(
                    p.classify((prefix << 1) | (1 - bit) as u64).unwrap(),
                    BitClass::Red
                );
            }
        }
    }

    /// Brute-force effectiveness oracle: enumerate both completions of
    /// every prefix straight from the green table.
    fn effective_oracle(n: usize, green: &[u64]) -> bool {
        (0..(1u64 << (n - 1))).all(|prefix| {
            let hits = [0u64, 1]
                .iter()
                .filter(|&&b| green.contains(&((prefix << 1) | b)))
                .count();
            hits == 1
        })
    }

    #[test]
    fn effectiveness_flag_matches_brute_force_on_random_subsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xeffec7);
        for _ in 0..200 {
            let n = rng.random_range(1..=6usize);
            let size = 1u64 << n;
            let greens: Vec<u64> = (0..size).filter(|_| rng.random::<bool>()).collect();
            if greens.is_empty() || greens.len() as u64 == size {
                continue;
            }
            let p = Partition::relaxed(n, &greens).unwrap();
            assert_eq!(p.is_effective(), effective_oracle(n, &greens));
            if p.is_effective() {
                assert_eq!(p.gamma(), 0.5, "effective partitions are balanced");
            }
        }
    }
}
