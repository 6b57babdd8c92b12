//! Per-index random substreams.
//!
//! Every consumer of randomness (random document `j`, fold shuffle, split `s`)
//! derives its own ChaCha8 stream from `(seed, domain, index)`, so results do
//! not depend on generation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Distinct domains never share a substream for the same
/// `(seed, index)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    RandomDocument = 1,
    Folds = 2,
    Split = 3,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 256-bit ChaCha key for `(seed, domain, index)`.
pub fn substream_key(seed: u64, domain: Domain, index: u64) -> [u8; 32] {
    let base = mix64(seed ^ mix64((domain as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)));
    let stream = mix64(base ^ mix64(index.wrapping_add(0x632b_e59b_d9b4_e019)));
    let mut key = [0u8; 32];
    let mut state = stream;
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    key
}

pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(substream_key(seed, domain, index))
}
