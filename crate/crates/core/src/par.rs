//! Order-independent parallel helpers. With the `parallel` feature off
//! everything runs serially and produces the same results.

use std::ops::Range;

/// Splits `0..n` into fixed chunks, maps each, and folds the chunk results
/// left to right. Chunk boundaries do not depend on the thread count, so the
/// result is identical with and without the `parallel` feature.
pub(crate) fn map_reduce<T, M, R>(n: usize, chunk: usize, identity: fn() -> T, map: M, reduce: R) -> T
where
    T: Send,
    M: Fn(Range<usize>) -> T + Sync + Send,
    R: Fn(T, T) -> T,
{
    let chunk = chunk.max(1);
    let chunks = n.div_ceil(chunk);
    map_indexed(chunks, |c| map(c * chunk..((c + 1) * chunk).min(n)))
        .into_iter()
        .fold(identity(), reduce)
}

/// Maps `0..n` preserving order.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
