//! Keyed, counter-based random streams.
//!
//! Every random quantity in a run is a pure function of a master seed and a
//! small key (stream tag, agent, iteration). Draws therefore do not depend on
//! evaluation order or on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Distinct tags never share a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamTag {
    Pull = 0x70756c6c,
    Push = 0x70757368,
    Init = 0x696e6974,
    Exogenous = 0x65786f67,
}

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Hash of `(tag, agent, k)`, independent of the master seed.
#[inline]
pub fn key_hash(tag: StreamTag, agent: u64, k: u64) -> u64 {
    let h = splitmix64(tag as u64);
    let h = splitmix64(h ^ agent);
    splitmix64(h ^ k.rotate_left(32))
}

/// Generator for one `(seed, tag, agent, k)` key.
pub fn keyed(seed: u64, tag: StreamTag, agent: u64, k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ key_hash(tag, agent, k)))
}

/// Derives the master seed of run `index` from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index)
}
