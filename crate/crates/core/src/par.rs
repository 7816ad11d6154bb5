//! Row and index parallelism with a sequential fallback.
//!
//! With the `rayon` feature the helpers run on the current rayon pool, so
//! callers control the worker count with `ThreadPool::install`. Without it
//! they are plain loops. Every helper writes each output slot from a pure
//! function of its index, so results never depend on scheduling.

#[cfg(feature = "rayon")]
use rayon::prelude::*;

/// Fill `data` row by row. `row_len` is the number of elements per row.
pub(crate) fn fill_rows<T, F>(data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    if row_len == 0 {
        return;
    }
    #[cfg(feature = "rayon")]
    data.par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(y, row)| f(y, row));
    #[cfg(not(feature = "rayon"))]
    data.chunks_mut(row_len)
        .enumerate()
        .for_each(|(y, row)| f(y, row));
}

/// Fallible variant of [`fill_rows`]. On failure the error of the lowest
/// failing row is returned.
pub(crate) fn try_fill_rows<T, E, F>(data: &mut [T], row_len: usize, f: F) -> Result<(), E>
where
    T: Send,
    E: Send,
    F: Fn(usize, &mut [T]) -> Result<(), E> + Send + Sync,
{
    if row_len == 0 {
        return Ok(());
    }
    #[cfg(feature = "rayon")]
    let results: Vec<Result<(), E>> = data
        .par_chunks_mut(row_len)
        .enumerate()
        .map(|(y, row)| f(y, row))
        .collect();
    #[cfg(not(feature = "rayon"))]
    let results: Vec<Result<(), E>> = data
        .chunks_mut(row_len)
        .enumerate()
        .map(|(y, row)| f(y, row))
        .collect();
    results.into_iter().collect()
}

/// Evaluate `f` for every index in `0..n`, preserving index order.
pub(crate) fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "rayon")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "rayon"))]
    return (0..n).map(f).collect();
}
