//! Seeded randomness helpers.
//!
//! Every random choice in this crate flows through a [`ChaCha8Rng`] created
//! from an explicit `u64` seed, so runs are reproducible across platforms and
//! releases. When one logical seed has to drive many independent streams (one
//! per query, say), derive a per-stream seed with [`derive_seed`] instead of
//! reusing or incrementing the base seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Creates the crate's standard deterministic generator for a seed.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a stream index into an independent child seed
/// (splitmix64 finalizer over the pair). Distinct `(base, stream)` pairs give
/// well-separated seeds even when bases or streams are small consecutive
/// integers.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(stream)
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws `k` distinct indices from `0..n` uniformly without replacement
/// (partial Fisher–Yates), in selection order.
///
/// # Panics
///
/// Panics if `k > n`; callers validate their counts first.
pub fn sample_indices(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot sample {k} items from {n}");
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}
