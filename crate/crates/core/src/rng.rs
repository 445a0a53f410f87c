//! Deterministic random streams.
//!
//! Every random draw in a run comes from a ChaCha8 stream whose seed is
//! derived from `(global seed, owner id, tick, stream label)`. Streams never
//! depend on evaluation order, so permuting automata leaves results intact.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, used to fold stream labels into the seed.
pub fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Root of all random streams for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    seed: u64,
}

impl SeedStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn derive(&self, owner: u64, tick: u64, label: &str) -> u64 {
        let mut h = splitmix(self.seed);
        h = splitmix(h ^ owner);
        h = splitmix(h ^ tick);
        splitmix(h ^ label_hash(label))
    }

    pub fn stream(&self, owner: u64, tick: u64, label: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.derive(owner, tick, label))
    }
}
