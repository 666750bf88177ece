//! Deterministic RNG streams: one root seed, independent substreams for
//! factors, cores, patterns and noise, so generation order (or parallelism
//! across sources) never changes the data.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub fn stream(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive an independent sub-seed from a root seed and a purpose tag
/// (FNV-1a over the seed bytes and the tag), stable across platforms.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in seed.to_le_bytes().iter().chain(tag.as_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
