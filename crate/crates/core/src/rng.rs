//! Named random streams derived from one root seed.
//!
//! Every consumer of randomness (training shuffles, document sampling, the
//! per-token perturbation streams) asks for its own stream by name and key,
//! so results never depend on the order in which workers run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit seed for the stream `(root, name, key, index)`.
///
/// Fields are length-prefixed so `("ab", "c")` and `("a", "bc")` differ.
pub fn stream_seed(root: u64, name: &str, key: &str, index: u64) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &root.to_le_bytes());
    h = fnv1a(h, &(name.len() as u64).to_le_bytes());
    h = fnv1a(h, name.as_bytes());
    h = fnv1a(h, &(key.len() as u64).to_le_bytes());
    h = fnv1a(h, key.as_bytes());
    h = fnv1a(h, &index.to_le_bytes());
    splitmix64(h)
}

pub fn stream(root: u64, name: &str, key: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(root, name, key, index))
}

/// Stream used to perturb token `position` of document `doc_id`.
pub fn token_stream(root: u64, doc_id: &str, position: usize) -> StreamRng {
    stream(root, "perturb", doc_id, position as u64)
}
