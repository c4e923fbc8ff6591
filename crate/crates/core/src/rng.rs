//! Named random substreams derived from one user-visible seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Well-known substream names.
pub mod stream {
    pub const PREPARE: &str = "prepare";
    pub const AUGMENT: &str = "augment";
    pub const CROPS: &str = "crops";
    pub const INIT: &str = "init";
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// A generator for the substream `name` of `seed`.
pub fn substream(seed: u64, name: &str) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name.as_bytes()));
    rng
}

/// A generator for the `index`-th member of substream `name`, e.g. one per
/// epoch, so that a resumed run draws exactly what an uninterrupted run would.
pub fn indexed_substream(seed: u64, name: &str, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(fnv1a(name.as_bytes()));
    rng
}
