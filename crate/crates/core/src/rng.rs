//! Seeded randomness.
//!
//! Every random stream is a ChaCha20 generator (`rand_chacha`) seeded through
//! `SeedableRng::seed_from_u64`; Gaussian draws use the ziggurat sampler of
//! `rand_distr::StandardNormal`. Sub-streams are derived from one master seed
//! with a SplitMix64 mix of the seed and a stream label, so a single seed
//! reproduces a whole experiment.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Identifier written into synthetic-data headers.
pub const GENERATOR_ID: &str = "chacha20-ziggurat";

pub type Rng = ChaCha20Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of a named sub-stream from a master seed.
pub fn derive_seed(master: u64, stream: &str) -> u64 {
    // FNV-1a over the label, then mixed with the master seed
    let label = stream.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    });
    splitmix64(master ^ splitmix64(label))
}
