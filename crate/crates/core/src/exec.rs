//! Per-element map abstraction.
//!
//! Element kernels are pure functions of the element index. An executor
//! evaluates them and returns results in element order, so anything
//! accumulated from the returned vector is independent of how the work was
//! scheduled.

use alloc::vec::Vec;

pub trait ElementExecutor: Sync {
    fn map<T, F>(&self, range: core::ops::Range<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sequential;

impl ElementExecutor for Sequential {
    fn map<T, F>(&self, range: core::ops::Range<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        range.map(f).collect()
    }
}

/// Elements are processed in chunks of this size to bound the memory held
/// by element kernels awaiting accumulation.
pub const CHUNK: usize = 2048;

/// Source of wall-clock time in seconds; the core crate has none of its own.
pub trait Clock {
    fn now(&self) -> f64;
}

/// Always reports zero.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}
