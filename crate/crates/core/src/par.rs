//! Data-parallel helpers. With the `parallel` feature the work runs on the
//! rayon pool; without it, or with [`Exec::Sequential`], it runs in order on
//! the calling thread. Results come back in index order either way, so
//! aggregation never depends on scheduling.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    #[default]
    Parallel,
    Sequential,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// `f(i)` for `i` in `0..n`, in index order.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Splits `0..n` into contiguous chunks, maps each chunk with `f`, then
/// folds the per-chunk results left to right with `merge`.
pub fn chunked_fold<T, F, M>(exec: Exec, n: usize, chunk: usize, f: F, init: T, merge: M) -> T
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
    M: Fn(T, T) -> T,
{
    let chunk = chunk.max(1);
    let chunks = n.div_ceil(chunk);
    let parts = map_indexed(exec, chunks, |c| f(c * chunk..((c + 1) * chunk).min(n)));
    parts.into_iter().fold(init, merge)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let f = |i: usize| (i * i) % 97;
        assert_eq!(map_indexed(Exec::Parallel, 1000, f), map_indexed(Exec::Sequential, 1000, f));
        let sum = |r: std::ops::Range<usize>| r.map(f).sum::<usize>();
        let a = chunked_fold(Exec::Parallel, 1000, 33, sum, 0, |a, b| a + b);
        let b = chunked_fold(Exec::Sequential, 1000, 7, sum, 0, |a, b| a + b);
        assert_eq!(a, b);
    }
}
