//! Seed streams.
//!
//! Every stochastic operation draws from its own generator, derived from the
//! user seed, a fixed operation tag and a trial index. Two operations never
//! share a stream, so adding a draw in one place cannot shift another's output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub mod tag {
    pub const LABELS: &str = "labels";
    pub const EDGES: &str = "edges";
    pub const SPLIT: &str = "split";
    pub const SPHERE_SPLIT: &str = "sphere-split";
    pub const ANCHORS: &str = "anchors";
    pub const REPRESENTATIVES: &str = "representatives";
    pub const FORCED: &str = "forced";
    pub const COMBINE: &str = "combine";
    pub const GAMMA_SPLIT: &str = "gamma-split";
    pub const PRELIMINARY: &str = "preliminary";
    pub const TRIAL: &str = "trial";
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a 64-bit sub-seed from `(seed, tag, index)`.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a(tag) ^ splitmix64(index)))
}

/// Independent generator for `(seed, tag, index)`.
pub fn stream(seed: u64, tag: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, tag, index))
}
