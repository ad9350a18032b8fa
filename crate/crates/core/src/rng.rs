//! Seed derivation.
//!
//! Every random stream in a run is identified by `(base_seed, role, index)`
//! and seeded from a fixed hash of that triple: FNV-1a over the little-endian
//! bytes of `base_seed`, the UTF-8 bytes of `role` and the little-endian bytes
//! of `index`, followed by the SplitMix64 finaliser. Streams for different
//! roles never share state, so adding a strategy to an experiment does not
//! perturb the draws of any other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for all seeded streams.
pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed for `(base_seed, role, index)`.
pub fn derive_seed(base_seed: u64, role: &str, index: u64) -> u64 {
    let mut h = FNV_OFFSET;
    let mut feed = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    };
    feed(&base_seed.to_le_bytes());
    feed(role.as_bytes());
    feed(&[0xff]);
    feed(&index.to_le_bytes());
    splitmix64(h)
}

/// Creates a generator for a derived stream.
pub fn stream(base_seed: u64, role: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(base_seed, role, index))
}
