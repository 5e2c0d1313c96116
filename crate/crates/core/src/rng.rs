//! Derived random streams.
//!
//! Every stochastic subroutine draws from its own ChaCha stream keyed by
//! `(seed, round, tag)`, so adding or reordering one subroutine never shifts
//! the numbers another one sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Subroutine tags. Kept in one place so two call sites never share a stream
/// by accident.
pub mod tag {
    pub const SYNTHETIC: &str = "synthetic";
    pub const INITIAL_POOL: &str = "initial-pool";
    pub const KMEANS: &str = "kmeans";
    pub const PARAM_INIT: &str = "param-init";
    pub const SGD_SHUFFLE: &str = "sgd-shuffle";
    pub const RANDOM_QUERY: &str = "random-query";
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// 64-bit key for the stream `(seed, round, tag)`.
pub fn stream_key(seed: u64, round: u64, tag: &str) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ round.wrapping_mul(0xd6e8_feb8_6659_fd93));
    splitmix64(h ^ fnv1a(tag.as_bytes()))
}

pub fn stream(seed: u64, round: u64, tag: &str) -> StreamRng {
    StreamRng::seed_from_u64(stream_key(seed, round, tag))
}

/// Stream for a sub-key below a `(seed, round, tag)` stream, e.g. one K-Means
/// run per candidate cluster count.
pub fn substream(seed: u64, round: u64, tag: &str, sub: u64) -> StreamRng {
    StreamRng::seed_from_u64(splitmix64(stream_key(seed, round, tag) ^ splitmix64(sub)))
}
