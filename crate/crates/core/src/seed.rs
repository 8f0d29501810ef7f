//! Keyed random streams.
//!
//! Every stochastic unit of work (one fitness evaluation, one resample of one
//! observation, one sweep cell) draws from its own stream, derived from the
//! master seed and a path of integer keys. Results therefore depend only on
//! the inputs and the seed, never on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a key path into a child seed.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |acc, &k| {
        splitmix64(acc ^ splitmix64(k.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

/// Opens the stream addressed by `(master, keys)`.
pub fn stream(master: u64, keys: &[u64]) -> Stream {
    Stream::seed_from_u64(derive_seed(master, keys))
}
