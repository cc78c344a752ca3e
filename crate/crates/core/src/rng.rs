//! Counter-based random streams.
//!
//! Every Monte Carlo path draws from its own ChaCha8 stream selected by
//! `(seed, stream id)`, so a path's randomness never depends on which worker
//! runs it or in what order. Reductions are done in path order, which makes
//! every estimate bitwise reproducible for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type PathRng = ChaCha8Rng;

pub fn stream(seed: u64, id: u64) -> PathRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

/// Runs `f` inside a pool of `workers` threads, or the global pool for `None`.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

/// Evaluates `f(path_index, rng)` for every path; output is in path order.
pub fn map_paths<T, F>(n: usize, seed: u64, stream_offset: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut PathRng) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = stream(seed, stream_offset + i as u64);
            f(i, &mut r)
        })
        .collect()
}
