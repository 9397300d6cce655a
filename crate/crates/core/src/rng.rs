//! Seeded randomness. Every consumer draws from its own ChaCha stream derived
//! from the run seed, so adding a consumer never shifts another's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes `k` into `seed` (splitmix64 finalizer), e.g. for per-fold model seeds.
pub fn derive(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream ids; one per consumer.
pub mod streams {
    pub const CV_SPLIT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const DROPOUT: u64 = 4;
    pub const SYNTH: u64 = 5;

    /// Stream for fold `k` of consumer `base`.
    pub fn fold(base: u64, k: usize) -> u64 {
        base | ((k as u64 + 1) << 32)
    }
}
