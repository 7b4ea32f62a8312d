//! Deterministic, labeled random streams.
//!
//! A stream is identified by `(master_seed, label)`. Its generator is
//! ChaCha12 seeded with `SHA-256(master_seed as little-endian u64 || label)`,
//! so the sequence depends on nothing but those two values. Child streams
//! append `/<index>` to the label.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha12Rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RngStream {
    master_seed: u64,
    label: String,
}

impl RngStream {
    pub fn new(master_seed: u64, label: impl Into<String>) -> Self {
        Self { master_seed, label: label.into() }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// A labeled substream, e.g. `proposer` → `proposer/3`.
    pub fn child(&self, index: u64) -> Self {
        Self { master_seed: self.master_seed, label: format!("{}/{}", self.label, index) }
    }

    pub fn sibling(&self, label: &str) -> Self {
        Self::new(self.master_seed, label)
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut hasher = Sha256::new();
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update(self.label.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha12Rng::from_seed(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draws(s: &RngStream) -> Vec<u64> {
        let mut r = s.rng();
        (0..32).map(|_| r.random()).collect()
    }

    #[test]
    fn same_stream_same_draws() {
        let s = RngStream::new(7, "design");
        assert_eq!(draws(&s), draws(&s.clone()));
    }

    #[test]
    fn labels_and_seeds_separate_streams() {
        let a = RngStream::new(7, "design");
        assert_ne!(draws(&a), draws(&RngStream::new(7, "ga")));
        assert_ne!(draws(&a), draws(&RngStream::new(8, "design")));
        assert_ne!(draws(&a.child(0)), draws(&a.child(1)));
        assert_eq!(a.child(3).label(), "design/3");
    }

    #[test]
    fn pinned_first_draw() {
        // Pins the generator algorithm: changing it breaks run reproducibility.
        let first: u64 = RngStream::new(0, "design").rng().random();
        let again: u64 = RngStream::new(0, "design").rng().random();
        assert_eq!(first, again);
        let expected = {
            let digest = Sha256::digest([&0u64.to_le_bytes()[..], b"design"].concat());
            let mut seed = [0u8; 32];
            seed.copy_from_slice(&digest);
            ChaCha12Rng::from_seed(seed).random::<u64>()
        };
        assert_eq!(first, expected);
    }
}
