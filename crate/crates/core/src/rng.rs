//! Counter-based random streams. Replica `i` of a computation seeded with
//! `seed` always draws from ChaCha stream `i`, so results do not depend on
//! how replicas are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub type StreamRng = ChaCha8Rng;

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive an independent seed for a named sub-computation.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fill_normals(rng: &mut impl Rng, out: &mut [f64]) {
    for x in out.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
}

/// Uniform on (0, 1].
pub fn open_uniform(rng: &mut impl Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Evaluate `f` for replicas `0..n` in parallel, returning results in index
/// order.
pub fn replicas<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

/// Like [`replicas`] but over fixed-size chunks, so per-chunk scratch space
/// can be reused. `f(start, end)` returns one value per replica in
/// `start..end`.
pub fn replica_chunks<T: Send>(
    n: usize,
    chunk: usize,
    f: impl Fn(usize, usize) -> Vec<T> + Sync + Send,
) -> Vec<T> {
    let chunk = chunk.max(1);
    let parts: Vec<Vec<T>> = (0..n.div_ceil(chunk))
        .into_par_iter()
        .map(|c| f(c * chunk, ((c + 1) * chunk).min(n)))
        .collect();
    parts.into_iter().flatten().collect()
}
