//! Counter-based random streams.
//!
//! Every random decision in a simulation draws from a stream derived from
//! `(master seed, domain, stream, index)`. Draw `k` of a run therefore sees
//! the same randomness no matter how work is split across threads, which
//! makes every simulation result reproducible bit for bit at a fixed seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAIN_SKIP: u64 = 1;
pub const DOMAIN_UNIFORM: u64 = 2;
pub const DOMAIN_DEADLOCK: u64 = 3;
pub const DOMAIN_RATE: u64 = 4;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives an independent generator for `(domain, stream, index)` under the
/// master seed.
pub fn substream(master: u64, domain: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut state = master ^ 0x6a09e667f3bcc908;
    for v in [domain, stream, index] {
        state ^= splitmix64(&mut state) ^ v.wrapping_mul(0xff51afd7ed558ccd);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// In-place Fisher-Yates shuffle. Kept local so the byte-level consumption
/// of the stream is pinned by this crate, not by a dependency's internals.
pub fn shuffle<T>(items: &mut [T], rng: &mut impl Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}
