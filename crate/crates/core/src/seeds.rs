//! Seed derivation and RNG stream layout.
//!
//! Every run owns a counter-based RNG (`ChaCha8Rng`) seeded from a single
//! 64-bit value, with fixed stream ids separating the independent random
//! sequences of a run. Repeats of an experiment derive their per-run seeds
//! from the master seed as `splitmix64(master ^ run_index)`; the finalizer
//! is a bijection, so distinct run indices always map to distinct seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id for the tuner's perturbation-sign draws.
pub const STREAM_PERTURBATION: u64 = 0;
/// Stream id for simulated game outcomes.
pub const STREAM_GAMES: u64 = 1;
/// Stream id for the random signs of the initial offsets.
pub const STREAM_OFFSETS: u64 = 2;

/// The splitmix64 finalizer: a cheap 64-bit mixing bijection.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for run `index` of an experiment with the given master seed.
pub fn derive_run_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ index)
}

/// An RNG positioned at the start of the given stream of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
