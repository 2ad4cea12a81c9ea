//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha20 stream whose key is a
//! 64-bit seed. Seeds for sub-tasks are derived with [`seed_split`] from a
//! base seed and a list of integer labels, so that two cells of a sweep never
//! share a stream and no stream depends on how many draws another consumed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// The stream type used throughout.
pub type Stream = ChaCha20Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const LABEL_OFFSET: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 finalizer. A bijection on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and an ordered list of labels.
///
/// `h0 = mix64(base ^ GOLDEN)`, then for each label
/// `h <- mix64(h * GOLDEN ^ mix64(label + LABEL_OFFSET))` (wrapping
/// arithmetic). Every step is a bijection in the label, so for a fixed prefix
/// distinct final labels never collide. Label order matters:
/// `seed_split(s, &[1, 2]) != seed_split(s, &[2, 1])` in general.
///
/// The constants and the recurrence are part of the file-format contract and
/// must not change.
pub fn seed_split(base: u64, labels: &[u64]) -> u64 {
    let mut h = mix64(base ^ GOLDEN);
    for &label in labels {
        h = mix64(h.wrapping_mul(GOLDEN) ^ mix64(label.wrapping_add(LABEL_OFFSET)));
    }
    h
}

/// Opens the stream keyed by `seed`. The 256-bit ChaCha key is the SplitMix64
/// sequence started at `seed`.
pub fn stream(seed: u64) -> Stream {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    ChaCha20Rng::from_seed(key)
}

/// One standard normal draw.
#[inline]
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `n` i.i.d. standard normal draws.
pub fn normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

/// Uniform draw on `[0, 1)`.
#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Canonical 64-bit key of a point: `-0.0` is folded onto `0.0` so that
/// numerically equal points hash alike.
pub fn point_key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|&v| if v == 0.0 { 0u64 } else { v.to_bits() }).collect()
}

/// Seed of the stream reserved for point `x` under `seed`.
pub fn point_seed(seed: u64, tag: u64, x: &[f64]) -> u64 {
    let mut labels = Vec::with_capacity(x.len() + 2);
    labels.push(tag);
    labels.push(x.len() as u64);
    labels.extend(point_key(x));
    seed_split(seed, &labels)
}
