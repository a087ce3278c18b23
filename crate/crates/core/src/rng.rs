//! Deterministic seeded random streams.
//!
//! Every source of randomness in the pipeline is a ChaCha stream derived from
//! one top-level `u64` seed and a path of tags. Two streams with different
//! tag paths are statistically independent, and the same `(seed, tags)` pair
//! always yields the same stream, on every platform. Streams must not be
//! shared across concurrent workers; derive one child per worker instead.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tag for scenario randomness (trajectories, measurement noise).
pub const STREAM_SCENARIO: u64 = 1;
/// Tag for parameter initialization.
pub const STREAM_INIT: u64 = 2;
/// Tag for per-epoch training-set shuffles.
pub const STREAM_SHUFFLE: u64 = 3;
/// Tag for the train/test sequence split.
pub const STREAM_SPLIT: u64 = 4;
/// Tag for synthetic probe inputs (gradient checking).
pub const STREAM_PROBE: u64 = 5;

/// SplitMix64 step; used only to expand seeds, never as a user-facing rng.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Collapse a `(seed, tags)` path into a single well-mixed 64-bit value.
pub fn child_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(seed);
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag ^ 0xA076_1D64_78BD_642F));
    }
    state
}

/// Derive an independent child stream from a base seed and a tag path.
pub fn child_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = child_seed(seed, tags);
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
