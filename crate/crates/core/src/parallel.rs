//! Worker selection for the data-parallel loops.
//!
//! Every parallel loop in the crate is an indexed map whose results come
//! back in index order, so reductions downstream are independent of the
//! worker count. With the `parallel` feature disabled all work runs on the
//! calling thread.

use serde::{Deserialize, Serialize};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SLN_GBM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Workers {
    Sequential,
    Threads(usize),
}

impl Default for Workers {
    fn default() -> Self {
        Self::from_env()
    }
}

impl Workers {
    /// `SLN_GBM_THREADS` workers when set, otherwise one per available core.
    pub fn from_env() -> Self {
        let cap = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&c| c >= 1);
        let count = cap.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
        Self::with_count(count)
    }

    pub fn with_count(count: usize) -> Self {
        if count <= 1 {
            Self::Sequential
        } else {
            Self::Threads(count)
        }
    }

    pub fn count(&self) -> usize {
        match *self {
            Self::Sequential => 1,
            Self::Threads(k) => k,
        }
    }

    /// `(0..len).map(f)` with results in index order.
    pub fn map_indexed<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match *self {
            Self::Sequential => (0..len).map(f).collect(),
            Self::Threads(k) => par_map(k, len, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(threads: usize, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| (0..len).into_par_iter().map(f).collect()),
        Err(_) => (0..len).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(_threads: usize, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = Workers::Sequential.map_indexed(1000, |i| i * i);
        let par = Workers::Threads(4).map_indexed(1000, |i| i * i);
        assert_eq!(seq, par);
    }

    #[test]
    fn count_maps_to_variant() {
        assert_eq!(Workers::with_count(0), Workers::Sequential);
        assert_eq!(Workers::with_count(1), Workers::Sequential);
        assert_eq!(Workers::with_count(3).count(), 3);
    }
}
