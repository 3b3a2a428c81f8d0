//! Seeded random streams.
//!
//! Every repetition owns one seed. Independent ChaCha streams are carved out of
//! it so that the environment and the policy never share draws, and so that a
//! given round's context and feedback depend only on `(seed, round)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const SETUP_STREAM: u64 = 0;
const POLICY_STREAM: u64 = 1;

/// Stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Environment setup draws (hidden parameters, instance order).
pub fn setup_rng(seed: u64) -> SimRng {
    stream_rng(seed, SETUP_STREAM)
}

/// The policy's private stream (initialization, exploration coin flips).
pub fn policy_rng(seed: u64) -> SimRng {
    stream_rng(seed, POLICY_STREAM)
}

/// Context draws for round `t` (1-based).
pub fn context_rng(seed: u64, t: usize) -> SimRng {
    stream_rng(seed, 2 + 2 * t as u64)
}

/// Feedback draws for round `t` (1-based).
pub fn feedback_rng(seed: u64, t: usize) -> SimRng {
    stream_rng(seed, 3 + 2 * t as u64)
}
