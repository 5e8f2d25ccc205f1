//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper returns results in index order, so output never depends on
//! whether the work ran on the rayon pool or on the calling thread. Without
//! the `parallel` feature both modes run sequentially.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// True when work will actually be spread over the thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// `f(0..n)` collected in index order.
pub fn map_range<R, F>(par: Parallelism, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = par;
    (0..n).map(f).collect()
}

/// `f` over a slice, collected in order.
pub fn map_slice<T, R, F>(par: Parallelism, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = par;
    items.iter().map(f).collect()
}

/// Highest-scoring index in `0..n`, evaluated chunk by chunk.
///
/// Ties go to the lowest index. After each chunk `stop` is consulted with the
/// running best and the number of indices evaluated so far; because chunk
/// boundaries are fixed the result is identical in both parallelism modes.
pub fn best_by_chunks<S, F, G>(par: Parallelism, n: usize, chunk: usize, score: F, stop: G) -> Option<(usize, S)>
where
    S: PartialOrd + Copy + Send,
    F: Fn(usize) -> Option<S> + Sync + Send,
    G: Fn(&S, usize) -> bool,
{
    let chunk = chunk.max(1);
    let mut best: Option<(usize, S)> = None;
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let scores = map_range(par, end - start, |i| score(start + i));
        for (i, s) in scores.into_iter().enumerate() {
            if let Some(s) = s {
                let better = match &best {
                    None => true,
                    Some((_, b)) => s > *b,
                };
                if better {
                    best = Some((start + i, s));
                }
            }
        }
        if let Some((_, b)) = &best {
            if stop(b, end) {
                break;
            }
        }
        start = end;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| ((i * 7919) % 101) as f64;
        let a = best_by_chunks(Parallelism::Sequential, 1000, 64, |i| Some(f(i)), |_, _| false);
        let b = best_by_chunks(Parallelism::Parallel, 1000, 64, |i| Some(f(i)), |_, _| false);
        assert_eq!(a, b);
        let (idx, s) = a.unwrap();
        assert_eq!(s, 100.0);
        // lowest index with the max score
        assert!((0..idx).all(|i| f(i) < 100.0));
    }

    #[test]
    fn early_stop_is_chunk_aligned() {
        let hits = best_by_chunks(Parallelism::Parallel, 1000, 10, Some, |s, _| *s >= 15);
        assert_eq!(hits, Some((19, 19)));
    }

    #[test]
    fn map_range_keeps_order() {
        let v = map_range(Parallelism::Parallel, 100, |i| i * 2);
        assert_eq!(v, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }
}
