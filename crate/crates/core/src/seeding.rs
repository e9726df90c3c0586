//! Deterministic RNG derivation.
//!
//! All randomness in the pipeline flows from one root seed. Each stage or
//! per-item decision draws from a named sub-stream so that stages can be
//! rerun (or run in parallel) without perturbing each other.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over raw bytes. Stable across platforms and crate versions, unlike
/// `std::hash::DefaultHasher`.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Derive the seed of a named sub-stream from the root seed.
///
/// `purpose` names the stage ("extract", "assemble", "split", ...) and `key`
/// the per-item identity (post id, instance id, or "" for stage-level
/// streams).
pub fn substream_seed(root: u64, purpose: &str, key: &str) -> u64 {
    let mut buf = Vec::with_capacity(8 + purpose.len() + key.len() + 2);
    buf.extend_from_slice(&root.to_le_bytes());
    buf.push(0x1f);
    buf.extend_from_slice(purpose.as_bytes());
    buf.push(0x1f);
    buf.extend_from_slice(key.as_bytes());
    fnv1a64(&buf)
}

/// A seeded generator for the given sub-stream.
pub fn substream_rng(root: u64, purpose: &str, key: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(root, purpose, key))
}

/// The first fair-coin draw of a sub-stream. Matches what a consumer that
/// opens the stream and immediately draws one boolean would see.
pub fn substream_coin(root: u64, purpose: &str, key: &str) -> bool {
    use rand::Rng;
    substream_rng(root, purpose, key).random_bool(0.5)
}
