//! Execution-mode switch for the data-parallel entry points.
//!
//! Everything that fans out over independent units (one DAG per root vertex,
//! one report per vertex pair, one matrix row per layer node) goes through
//! [`par_map`], which preserves input order so parallel and sequential runs
//! produce byte-identical output. With the `parallel` feature disabled the
//! rayon path compiles out entirely.

/// How a data-parallel region executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    #[cfg(feature = "parallel")]
    Rayon,
}

impl Default for Parallelism {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        Parallelism::Rayon
    }
    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        Parallelism::Sequential
    }
}

/// Order-preserving map over an index range.
pub fn par_map<U, F>(mode: Parallelism, len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match mode {
        Parallelism::Sequential => (0..len).map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
    }
}

/// Fallible variant of [`par_map`]; the first error in index order wins.
pub fn try_par_map<U, E, F>(mode: Parallelism, len: usize, f: F) -> Result<Vec<U>, E>
where
    U: Send,
    E: Send,
    F: Fn(usize) -> Result<U, E> + Sync + Send,
{
    match mode {
        Parallelism::Sequential => (0..len).map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => {
            use rayon::prelude::*;
            let results: Vec<Result<U, E>> = (0..len).into_par_iter().map(f).collect();
            results.into_iter().collect()
        }
    }
}
