//! Seeded random streams.
//!
//! Every stochastic step in the crate draws from a [`StreamRng`] whose seed
//! is derived from a master seed and a small tuple of integers (a purpose tag,
//! an iteration index, a node id, ...). Two consumers that ask for the same
//! tuple get the same stream, regardless of thread scheduling or processing
//! order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The concrete generator used for every stream.
pub type StreamRng = ChaCha8Rng;

/// Purpose tags keep streams for different consumers disjoint.
pub mod tag {
    pub const NETWORK: u64 = 0x6e65_7467;
    pub const ORDER: u64 = 0x6f72_6472;
    pub const NEIGHBOR: u64 = 0x6e62_7272;
    pub const DEBATE: u64 = 0x6462_7465;
    pub const PERMUTATION: u64 = 0x7065_726d;
    pub const GRID: u64 = 0x6772_6964;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `master` with each component of `path` into a single 64-bit seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// A generator seeded from `derive_seed(master, path)`.
pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, path))
}
