//! Counter-based random streams.
//!
//! Every Monte Carlo trial draws from its own ChaCha8 stream selected by
//! `(seed, domain, trial index)`. A trial's randomness therefore depends
//! only on its index, never on which worker ran it or in what order, and a
//! single trial can be replayed in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator handed to samplers. Any [`rand::Rng`] works with the
/// sampling functions; this is the one the estimators use.
pub type TrialRng = ChaCha8Rng;

/// Keyed family of independent streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    seed: u64,
    domain: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self { seed, domain: 0 }
    }

    /// A key for a different experiment sharing the same user seed.
    ///
    /// Domains are mixed into the ChaCha key, so streams for distinct
    /// domains are unrelated even at equal trial indices.
    pub fn domain(self, label: &str) -> Self {
        Self {
            seed: self.seed,
            domain: fnv1a(label.as_bytes()),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The stream for trial `index`.
    pub fn trial(&self, index: u64) -> TrialRng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.domain.to_le_bytes());
        // Constant tail so that seed 0 / domain 0 is not an all-zero key.
        key[16..].copy_from_slice(b"bruhat-comparab\x01");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
