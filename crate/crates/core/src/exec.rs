//! Deterministic work splitting for Monte Carlo loops.
//!
//! Work is cut into fixed-size blocks and every block draws from its own
//! ChaCha stream keyed by `(seed, block index)`. Block results are returned
//! in block order, so reductions are bit-identical for any worker count and
//! with or without the `parallel` feature.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream used by every simulation in the crate.
pub type StreamRng = ChaCha8Rng;

/// Samples per Monte Carlo block.
pub const BLOCK_SIZE: usize = 4096;

/// Generator for stream `stream` of the family keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with task coordinates into an independent seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Index ranges of the blocks covering `0..total`.
pub fn blocks(total: usize) -> impl Iterator<Item = Range<usize>> {
    (0..total.div_ceil(BLOCK_SIZE)).map(move |b| b * BLOCK_SIZE..((b + 1) * BLOCK_SIZE).min(total))
}

/// Runs `f(block_index, range)` for every block and returns results in order.
pub fn map_blocks<T, F>(total: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, Range<usize>) -> T + Sync + Send,
{
    let ranges: Vec<Range<usize>> = blocks(total).collect();
    map_indexed(ranges.len(), |b| f(b as u64, ranges[b].clone()))
}

/// Runs `f(i)` for `i in 0..n` and returns results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Runs `f(i)` for `i in 0..n` and returns results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}
