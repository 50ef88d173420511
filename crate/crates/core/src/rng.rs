//! Seeded random streams.
//!
//! Every random draw in the library comes from a ChaCha8 generator
//! (`rand_chacha::ChaCha8Rng`), which is portable and fully specified. A
//! stream is identified by a root seed plus a path of labels and indices,
//! e.g. `(seed, "shortest-path/data", trial)`. The path is folded into a
//! 64-bit key with SplitMix64 finalization and the key seeds the generator
//! via `SeedableRng::seed_from_u64`.
//!
//! Two streams with different paths are statistically independent, and the
//! stream a work item sees depends only on its path, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fold_label(mut acc: u64, label: &str) -> u64 {
    // FNV-1a over the label bytes, then mixed into the accumulator.
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    acc = splitmix(acc ^ h);
    acc
}

/// Key for a named random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64, purpose: &str) -> Self {
        StreamKey(fold_label(splitmix(seed), purpose))
    }

    /// Derive a child stream for an index (trial, test point, ...).
    pub fn index(self, i: u64) -> Self {
        StreamKey(splitmix(self.0 ^ splitmix(i.wrapping_add(1))))
    }

    /// Derive a child stream for a label.
    pub fn label(self, label: &str) -> Self {
        StreamKey(fold_label(self.0, label))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Shorthand for `StreamKey::new(seed, purpose).rng()`.
pub fn stream(seed: u64, purpose: &str) -> Rng {
    StreamKey::new(seed, purpose).rng()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream(7, "x").random()).collect();
        let mut r = stream(7, "x");
        let b: Vec<u64> = (0..4).map(|_| r.random()).collect();
        // `a` re-creates the stream every draw, so only the first value matches.
        assert_eq!(a[0], b[0]);
        let mut r2 = stream(7, "x");
        let c: Vec<u64> = (0..4).map(|_| r2.random()).collect();
        assert_eq!(b, c);
        assert_ne!(StreamKey::new(7, "x"), StreamKey::new(7, "y"));
        assert_ne!(StreamKey::new(7, "x").index(0), StreamKey::new(7, "x").index(1));
        assert_ne!(StreamKey::new(7, "x"), StreamKey::new(8, "x"));
    }
}
