//! Seeded RNG streams.
//!
//! Every stochastic step in the pipeline draws from its own labeled stream so
//! that adding draws to one step never shifts another. A stream is identified
//! by the run seed plus a string label (plus an optional index for per-node
//! streams); ChaCha's 64-bit stream id carries the label hash.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Independent stream for `(seed, label)`.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label.as_bytes()));
    rng
}

/// Independent stream for `(seed, label, index)`; used for per-node work.
pub fn stream_indexed(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(
        fnv1a(label.as_bytes()).wrapping_add(index.wrapping_mul(0x9e3779b97f4a7c15)),
    );
    rng
}
