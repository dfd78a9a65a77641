// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8, a counter-based
//! generator with a 64-bit seed and 2^64 independent streams per seed.
//! Consumers use a fixed stream id so that, for example, interval draws and
//! simulation draws never share state even when given the same seed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STREAM_INTERVALS: u64 = 1;
pub const STREAM_SIMULATION: u64 = 2;
pub const STREAM_INGEST: u64 = 3;
pub const STREAM_TRIALS: u64 = 4;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child seed number `index` of `seed`; children are independent of each other
/// and of every named stream.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    let mut rng = stream(seed, STREAM_TRIALS);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}
