//! Deterministic RNG streams.
//!
//! Every arm draws from its own ChaCha stream keyed by (master seed, class, arm),
//! so adding arms at a larger scale leaves the streams of existing arms untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Auxiliary stream used by policies for randomized decisions and tie breaks.
pub const POLICY_STREAM: u64 = 1;
/// Auxiliary stream used by learning observers that sample their own rewards.
pub const LEARNING_STREAM: u64 = 2;

pub fn arm_rng(seed: u64, class: usize, arm: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((class as u64 + 1) << 40) | arm as u64);
    rng
}

pub fn aux_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
