//! Counter-based seeding: every (seed, index, purpose) triple maps to its own
//! independent generator, so results never depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keeping noise and masking draws on separate streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Noise = 1,
    Mask = 2,
    NullSeries = 3,
    Scene = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, index: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ index) ^ (stream as u64))
}

pub fn stream_rng(seed: u64, index: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index, stream))
}
