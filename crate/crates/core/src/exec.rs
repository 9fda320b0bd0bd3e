//! Chunked, order-deterministic evaluation of index ranges.
//!
//! Work is split into fixed-size chunks of consecutive indices. Each chunk is
//! folded sequentially into its own accumulator and the chunk accumulators are
//! merged left to right. The floating-point operation order therefore depends
//! only on `n`, never on the number of worker threads, and the sequential path
//! produces bit-identical results.

use serde::{Deserialize, Serialize};

/// Indices per chunk. Also the granularity of parallel work items.
pub const CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    /// Uses rayon when the `parallel` feature is enabled, otherwise falls back
    /// to [`Execution::Sequential`].
    #[default]
    Parallel,
    Sequential,
}

/// Configures the global worker pool. Has no effect without the `parallel`
/// feature; returns `false` if the pool was already initialised.
pub fn configure_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

fn fold_chunk<A, I, F>(chunk: u64, n: u64, init: &I, step: &F) -> A
where
    I: Fn() -> A,
    F: Fn(&mut A, u64),
{
    let mut acc = init();
    let lo = chunk * CHUNK;
    let hi = (lo + CHUNK).min(n);
    for i in lo..hi {
        step(&mut acc, i);
    }
    acc
}

/// Folds `step` over indices `0..n`, merging per-chunk accumulators in index
/// order.
pub fn fold_indexed<A, I, F, M>(n: u64, execution: Execution, init: I, step: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64) + Sync,
    M: Fn(&mut A, A),
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<A> = match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..chunks)
                .into_par_iter()
                .map(|c| fold_chunk(c, n, &init, &step))
                .collect()
        }
        _ => (0..chunks).map(|c| fold_chunk(c, n, &init, &step)).collect(),
    };
    let mut total = init();
    for part in parts {
        merge(&mut total, part);
    }
    total
}

/// Maps `f` over `0..n` preserving index order.
pub fn map_indexed<T, F>(n: u64, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(|i| f(i)).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_folds_are_bit_identical() {
        let n = 3 * CHUNK + 17;
        let run = |e| {
            fold_indexed(
                n,
                e,
                || 0.0f64,
                |acc, i| *acc += 1.0 / (1.0 + i as f64).sqrt(),
                |a, b| *a += b,
            )
        };
        assert_eq!(
            run(Execution::Parallel).to_bits(),
            run(Execution::Sequential).to_bits()
        );
    }

    #[test]
    fn empty_range_returns_init() {
        let v = fold_indexed(0, Execution::Parallel, || 5u32, |_, _| {}, |a, b| *a += b);
        assert_eq!(v, 5);
    }

    #[test]
    fn map_preserves_order() {
        let v = map_indexed(100, Execution::Parallel, |i| i * 2);
        assert_eq!(v, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }
}
