//! Seed derivation. All randomness flows from one root seed through named
//! streams, so adding or removing parallelism never changes results: the
//! stream for (name, index) is the same no matter which thread draws from it.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

/// Derives a child seed from a root seed, a stream name, and an index.
///
/// FNV-1a over the name bytes, mixed with the root and index, then a
/// splitmix64 finalizer. Stable across platforms and releases.
pub fn stream_seed(root: u64, name: &str, index: u64) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    for &b in name.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h ^ root.rotate_left(17) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// RNG for a named stream derived from `root`.
pub fn stream_rng(root: u64, name: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(root, name, index))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw in [0, 1) built from the top 53 bits of a u64, so the float
/// construction is under this crate's control rather than the rand crate's.
pub fn unit_uniform<R: Real, G: rand::RngCore>(rng: &mut G) -> R {
    let bits = rng.next_u64() >> 11;
    R::of(bits as f64 * (1.0 / (1u64 << 53) as f64))
}

/// Uniform draw in [-scale, +scale).
pub fn symmetric_uniform<R: Real, G: rand::RngCore>(rng: &mut G, scale: R) -> R {
    (unit_uniform::<R, G>(rng) * R::of(2.0) - R::one()) * scale
}

/// Standard normal draw via Box-Muller on two unit uniforms.
pub fn standard_normal<R: Real, G: rand::RngCore>(rng: &mut G) -> R {
    let mut u1: R = unit_uniform(rng);
    if u1 == R::zero() {
        u1 = R::of(f64::MIN_POSITIVE);
    }
    let u2: R = unit_uniform(rng);
    let two_pi = R::of(std::f64::consts::TAU);
    (-R::of(2.0) * u1.ln()).sqrt() * (two_pi * u2).cos()
}

/// Fisher-Yates sample of `count` distinct indices from `0..n`.
pub fn sample_indices<G: rand::RngCore>(rng: &mut G, n: usize, count: usize) -> Vec<usize> {
    assert!(
        count <= n,
        "cannot sample {count} distinct indices from {n}"
    );
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = i + (rng.next_u64() as usize) % (n - i);
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T, G: rand::RngCore>(rng: &mut G, items: &mut [T]) {
    let n = items.len();
    for i in (1..n).rev() {
        let j = (rng.next_u64() as usize) % (i + 1);
        items.swap(i, j);
    }
}
