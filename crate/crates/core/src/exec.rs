//! Data-parallel execution with a sequential fallback.
//!
//! Every parallel call site in the crate goes through [`Execution`], so the
//! same code path runs on a rayon pool or on the calling thread. Results are
//! always returned in input order, and no call site lets the schedule leak
//! into random number streams, so both modes produce identical output.

/// How data-parallel loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Runs on the rayon global pool. Without the `parallel` feature this
    /// behaves exactly like `Sequential`.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.into_par_iter().map(f).collect()
            }
            _ => items.into_iter().map(f).collect(),
        }
    }

    /// Maps `f` over `0..n`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Runs `f` on every mutable chunk of `data` together with the chunk index.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let chunk = chunk.max(1);
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                data.par_chunks_mut(chunk)
                    .enumerate()
                    .for_each(|(i, c)| f(i, c));
            }
            _ => data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c)),
        }
    }

    /// Runs `op` inside a pool capped at `threads` workers, if given.
    pub fn install<R: Send>(self, threads: Option<usize>, op: impl FnOnce() -> R + Send) -> R {
        match (self, threads) {
            #[cfg(feature = "parallel")]
            (Execution::Parallel, Some(n)) if n > 0 => {
                match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                    Ok(pool) => pool.install(op),
                    Err(e) => {
                        log::warn!("could not build a {n}-thread pool ({e}); using the global pool");
                        op()
                    }
                }
            }
            _ => op(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let a = Execution::Sequential.map(items.clone(), |x| x * x + 1);
        let b = Execution::Parallel.map(items, |x| x * x + 1);
        assert_eq!(a, b);

        let mut x = vec![0usize; 37];
        let mut y = x.clone();
        Execution::Sequential.for_each_chunk_mut(&mut x, 5, |c, s| s.iter_mut().for_each(|v| *v = c));
        Execution::Parallel.for_each_chunk_mut(&mut y, 5, |c, s| s.iter_mut().for_each(|v| *v = c));
        assert_eq!(x, y);
        assert_eq!(x[36], 7);
    }
}
