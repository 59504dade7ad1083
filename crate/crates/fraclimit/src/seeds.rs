//! Seed derivation for replicate-parallel Monte Carlo.
//!
//! Each replicate gets its own ChaCha12 stream keyed by a SplitMix64 hash of
//! the root seed and the replicate index. Streams are independent of the
//! thread that happens to run the replicate, so experiments are reproducible
//! for any worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Bijective on u64, good avalanche behavior.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replicate `index` under root seed `root`.
///
/// The index is offset by one before mixing so that `root` and replicate 0
/// do not collide with the raw root stream.
pub fn replicate_seed(root: u64, index: u64) -> u64 {
    splitmix64(root ^ index.wrapping_add(1).wrapping_mul(GOLDEN))
}

/// Generator for replicate `index` under root seed `root`.
pub fn rng_for(root: u64, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(replicate_seed(root, index))
}
