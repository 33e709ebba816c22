//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) the loops below run on the
//! rayon global pool; without it, or after [`set_sequential(true)`], they run
//! on the calling thread. Reductions are chunked with a fixed chunk size and
//! combined in index order, so results are bit-identical in both modes and
//! independent of the thread count.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const CHUNK: usize = 2048;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Forces the sequential path even when the `parallel` feature is enabled.
pub fn set_sequential(sequential: bool) {
    FORCE_SEQUENTIAL.store(sequential, Ordering::Relaxed);
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// `(0..n).map(f).collect()`, in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Deterministic `Σ_{i<n} f(i)`.
pub fn sum_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = map_range(chunks, |c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(n);
        (start..end).map(&f).sum::<f64>()
    });
    partial.into_iter().sum()
}

/// Deterministic componentwise `Σ_{i<n} f(i)` for pairs.
pub fn sum_pair_range<F>(n: usize, f: F) -> (f64, f64)
where
    F: Fn(usize) -> (f64, f64) + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = map_range(chunks, |c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(n);
        (start..end)
            .map(&f)
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y))
    });
    partial
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y))
}

/// Like [`sum_range`] but also counts how many indices contributed.
pub fn sum_count_range<F>(n: usize, f: F) -> (f64, usize)
where
    F: Fn(usize) -> Option<f64> + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = map_range(chunks, |c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(n);
        (start..end)
            .filter_map(&f)
            .fold((0.0, 0usize), |(s, k), v| (s + v, k + 1))
    });
    partial
        .into_iter()
        .fold((0.0, 0), |(s, k), (ps, pk)| (s + ps, k + pk))
}

/// Deterministic maximum of `f(i)` (NaN-free inputs assumed).
pub fn max_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    map_range(chunks, |c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(n);
        (start..end).map(&f).fold(f64::NEG_INFINITY, f64::max)
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

/// Fallible ordered map; the first error (lowest index) wins.
pub fn try_map_range<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_range(n, f).into_iter().collect()
}
