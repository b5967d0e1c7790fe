//! Data-parallel helpers with a sequential fallback.
//!
//! Work is split into fixed-size chunks and partial results are combined by
//! a pairwise tree in chunk order, so both strategies return bit-identical
//! floating-point results.

use std::ops::Range;

/// Rows per chunk for per-sample reductions.
pub const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled, otherwise
    /// runs sequentially.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Ordered map over `items`.
pub fn map<T, U, F>(exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n` in chunks of [`CHUNK`] and tree-reduces the partials.
///
/// Returns `None` when `n == 0`.
pub fn chunked_reduce<T, F, C>(exec: Exec, n: usize, f: F, combine: C) -> Option<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
    C: Fn(T, T) -> T,
{
    let ranges: Vec<Range<usize>> = (0..n.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(n))
        .collect();
    let partials = map(exec, &ranges, |r| f(r.clone()));
    tree_reduce(partials, &combine)
}

fn tree_reduce<T, C: Fn(T, T) -> T>(mut items: Vec<T>, combine: &C) -> Option<T> {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree_bitwise() {
        let xs: Vec<f64> = (0..10_000).map(|i| ((i as f64) * 0.731).sin() * 1e3).collect();
        let sum = |exec| {
            chunked_reduce(exec, xs.len(), |r| xs[r].iter().sum::<f64>(), |a, b| a + b).unwrap()
        };
        assert_eq!(sum(Exec::Sequential).to_bits(), sum(Exec::Parallel).to_bits());
    }

    #[test]
    fn empty_and_partial_chunks() {
        assert!(chunked_reduce(Exec::Sequential, 0, |r| r.len(), |a, b| a + b).is_none());
        let total = chunked_reduce(Exec::Parallel, 3 * CHUNK + 7, |r| r.len(), |a, b| a + b);
        assert_eq!(total, Some(3 * CHUNK + 7));
    }

    #[test]
    fn map_preserves_order() {
        let v: Vec<usize> = (0..100).collect();
        assert_eq!(map(Exec::Parallel, &v, |x| x * 2), map(Exec::Sequential, &v, |x| x * 2));
    }
}
