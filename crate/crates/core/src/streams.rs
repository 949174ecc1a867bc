//! Keyed random substreams.
//!
//! Every stochastic quantity draws from a ChaCha8 generator whose 256-bit key
//! is `(master seed, domain, a, b)`. Any work unit can therefore rebuild its
//! own stream from its coordinates, and results do not depend on how work is
//! split across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Which part of the computation a stream feeds. Keeps keys disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Realization = 1,
    Disruption = 2,
    McBlock = 3,
    Bootstrap = 4,
    SeedDerivation = 5,
    Oracle = 6,
}

pub fn substream(seed: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, domain as u64, a, b]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Derives an independent 64-bit seed from `(seed, tag)`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    substream(seed, Domain::SeedDerivation, tag, 0).next_u64()
}
