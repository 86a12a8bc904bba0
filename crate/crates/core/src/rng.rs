//! Counter-based deterministic random streams.
//!
//! Every random draw in the crate comes from a stream addressed by
//! `(seed, purpose tag, frame, chirp)`. The ChaCha block function is keyed by
//! a hash of `(seed, tag)` and the `(frame, chirp)` pair selects the stream,
//! so any draw can be reproduced without replaying the others. Results are
//! therefore independent of thread count and evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a. Stable across platforms and compiler versions, unlike
/// `std`'s default hasher.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derive a child seed from a parent seed and a label (e.g. a dataset entry id).
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a64(label.as_bytes())))
}

fn key_bytes(seed: u64, tag: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut state = derive_seed(seed, tag);
    for chunk in out.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    out
}

/// Random stream for `(seed, tag, frame, chirp)`.
pub fn stream(seed: u64, tag: &str, frame: u32, chirp: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key_bytes(seed, tag));
    rng.set_stream(((frame as u64) << 32) | chirp as u64);
    rng
}

/// Stream for a purpose that has no frame/chirp structure.
pub fn tagged(seed: u64, tag: &str) -> ChaCha8Rng {
    stream(seed, tag, 0, 0)
}
