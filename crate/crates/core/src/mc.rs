//! Deterministic parallel Monte Carlo drivers.
//!
//! Work is cut into fixed-size chunks of path indices. Chunks run in parallel,
//! but results are always combined in chunk order, so the output depends only
//! on the seed and never on the number of worker threads.

use rayon::prelude::*;

use crate::rng::RandomStream;
use crate::stats::Welford;

/// Paths per parallel work item.
pub const CHUNK: usize = 1024;

/// Evaluates `f(i, stream_i)` for `i in 0..n` in parallel, keeping index order.
pub fn par_map<R, F>(n: usize, root: &RandomStream, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, &mut RandomStream) -> R + Sync,
{
    (0..n)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            let mut s = root.derive(i as u64);
            f(i, &mut s)
        })
        .collect()
}

/// Runs `n` paths, each yielding `K` statistics, and returns one accumulator
/// per statistic.
pub fn par_moments<const K: usize, F>(n: usize, root: &RandomStream, f: F) -> [Welford; K]
where
    F: Fn(usize, &mut RandomStream) -> [f64; K] + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partial: Vec<[Welford; K]> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = [Welford::new(); K];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let mut s = root.derive(i as u64);
                let v = f(i, &mut s);
                for (a, x) in acc.iter_mut().zip(v) {
                    a.push(x);
                }
            }
            acc
        })
        .collect();
    let mut out = [Welford::new(); K];
    for p in &partial {
        for (o, q) in out.iter_mut().zip(p) {
            o.merge(q);
        }
    }
    out
}
