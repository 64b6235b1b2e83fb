//! Seed derivation for independent, reproducible random streams.
//!
//! Everything random in the crate draws from a [`ChaCha8Rng`] seeded
//! through [`derive_seed`], so a corpus-level seed plus a string tag
//! (instance id, tree index, split attempt) pins every stream. Parallel
//! execution cannot change any output because no stream is ever shared.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives a child seed from a base seed and a string tag.
///
/// FNV-1a over the tag bytes folded into the seed, finished with a
/// splitmix64 avalanche so near-identical tags land far apart.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = seed ^ 0xcbf2_9ce4_8422_2325;
    for &b in tag.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A seeded random stream for the given tag, independent of all other tags.
pub fn stream(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}
