//! Seed derivation for reproducible parallel Monte Carlo.
//!
//! Every work item draws from its own ChaCha8 stream whose seed is
//! `splitmix64(master ⊕ splitmix64(index + 1))`. Work is split into fixed
//! chunks before any thread sees it, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Points handled by one work item.
pub const CHUNK: usize = 4096;

/// One round of the SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th task under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}

pub fn task_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index))
}

/// Splits `n` items into `(chunk_index, start, len)` triples of at most
/// [`CHUNK`] items.
pub fn chunks(n: usize) -> Vec<(u64, usize, usize)> {
    (0..n.div_ceil(CHUNK))
        .map(|c| {
            let start = c * CHUNK;
            (c as u64, start, CHUNK.min(n - start))
        })
        .collect()
}
