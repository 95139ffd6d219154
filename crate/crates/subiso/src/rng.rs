//! Seed derivation for reproducible runs.
//!
//! One root seed identifies a whole experiment; per-run and per-iteration
//! generators are derived from it by index so replays are bit-identical no
//! matter how many draws any other run consumed. ChaCha streams act as the
//! counters: iteration `k` of a run always reads stream `k` of that run's
//! generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche for index-derived seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for run `run_index` of the experiment rooted at `root`.
pub fn derive_run_seed(root: u64, run_index: u64) -> u64 {
    splitmix64(root ^ splitmix64(run_index.wrapping_add(0xa076_1d64_78bd_642f)))
}

/// Generator for iteration `k` of the walk seeded by `seed`.
///
/// Each iteration gets its own stream, so redraws inside an iteration do not
/// shift later iterations.
pub fn iteration_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}
