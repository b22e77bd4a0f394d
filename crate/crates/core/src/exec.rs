//! Data-parallel execution of independent work items. Without the
//! `parallel` feature every policy runs sequentially.

use serde::Serialize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Execution {
    Sequential,
    /// Global rayon pool.
    #[default]
    Parallel,
    /// Dedicated pool of `jobs` threads.
    ParallelWith {
        jobs: usize,
    },
}

impl Execution {
    /// Policy for a `--jobs` style limit: `1` is sequential, `0` means all cores.
    pub fn from_jobs(jobs: usize) -> Self {
        match jobs {
            1 => Execution::Sequential,
            0 => Execution::Parallel,
            n => Execution::ParallelWith { jobs: n },
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Execution::Sequential)
    }

    /// Applies `f` to every item, preserving order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            match *self {
                Execution::Sequential => items.iter().map(f).collect(),
                Execution::Parallel => items.par_iter().map(f).collect(),
                Execution::ParallelWith { jobs } => {
                    with_pool(jobs, || items.par_iter().map(&f).collect())
                }
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            items.iter().map(f).collect()
        }
    }

    /// Runs two closures, concurrently when parallel.
    pub fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        #[cfg(feature = "parallel")]
        {
            match *self {
                Execution::Sequential => (a(), b()),
                Execution::Parallel => rayon::join(a, b),
                Execution::ParallelWith { jobs } => with_pool(jobs, || rayon::join(a, b)),
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            (a(), b())
        }
    }

    /// Mutates a slice element-wise in chunks, concurrently when parallel.
    pub fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            const CHUNK: usize = 1024;
            let run = |items: &mut [T]| {
                items
                    .par_chunks_mut(CHUNK)
                    .enumerate()
                    .for_each(|(c, chunk)| {
                        for (j, x) in chunk.iter_mut().enumerate() {
                            f(c * CHUNK + j, x)
                        }
                    })
            };
            match *self {
                Execution::Sequential => items.iter_mut().enumerate().for_each(|(i, x)| f(i, x)),
                Execution::Parallel => run(items),
                Execution::ParallelWith { jobs } => with_pool(jobs, || run(items)),
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            items.iter_mut().enumerate().for_each(|(i, x)| f(i, x))
        }
    }
}

#[cfg(feature = "parallel")]
fn with_pool<R: Send>(jobs: usize, op: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(op),
        // fall back to the global pool if a dedicated one cannot be built
        Err(_) => op(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        for ex in [
            Execution::Sequential,
            Execution::Parallel,
            Execution::ParallelWith { jobs: 3 },
        ] {
            let out = ex.map(&items, |x| x * x);
            assert_eq!(out, items.iter().map(|x| x * x).collect::<Vec<_>>());
        }
    }

    #[test]
    fn join_returns_both() {
        let (a, b) = Execution::Parallel.join(|| 1 + 1, || "x");
        assert_eq!((a, b), (2, "x"));
    }

    #[test]
    fn for_each_mut_indexes() {
        let mut v = vec![0usize; 5000];
        Execution::Parallel.for_each_mut(&mut v, |i, x| *x = i);
        assert!(v.iter().enumerate().all(|(i, x)| i == *x));
    }

    #[test]
    fn jobs_mapping() {
        assert_eq!(Execution::from_jobs(1), Execution::Sequential);
        assert_eq!(Execution::from_jobs(0), Execution::Parallel);
        assert_eq!(Execution::from_jobs(4), Execution::ParallelWith { jobs: 4 });
    }
}
