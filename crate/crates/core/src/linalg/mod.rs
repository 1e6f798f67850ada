//! Line and direct solvers with operation counters.

mod cyclic;
mod sparse;
mod tridiag;

pub use cyclic::CyclicTridiagFactor;
pub use sparse::{SparseDirectFactor, Triplet};
pub use tridiag::TridiagFactor;

use std::sync::atomic::{AtomicU64, Ordering};

/// Floating-point operation counts per kernel.
///
/// Convention: each add, subtract, multiply or divide counts one.
#[derive(Debug)]
pub struct FlopCounters {
    pub tridiag_factor: AtomicU64,
    pub tridiag_solve: AtomicU64,
    pub cyclic_factor: AtomicU64,
    pub cyclic_solve: AtomicU64,
    pub sparse_factor: AtomicU64,
    pub sparse_solve: AtomicU64,
}

/// Plain snapshot of [`FlopCounters`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FlopSnapshot {
    pub tridiag_factor: u64,
    pub tridiag_solve: u64,
    pub cyclic_factor: u64,
    pub cyclic_solve: u64,
    pub sparse_factor: u64,
    pub sparse_solve: u64,
}

impl FlopCounters {
    pub const fn new() -> Self {
        Self {
            tridiag_factor: AtomicU64::new(0),
            tridiag_solve: AtomicU64::new(0),
            cyclic_factor: AtomicU64::new(0),
            cyclic_solve: AtomicU64::new(0),
            sparse_factor: AtomicU64::new(0),
            sparse_solve: AtomicU64::new(0),
        }
    }

    pub fn snapshot(&self) -> FlopSnapshot {
        FlopSnapshot {
            tridiag_factor: self.tridiag_factor.load(Ordering::Relaxed),
            tridiag_solve: self.tridiag_solve.load(Ordering::Relaxed),
            cyclic_factor: self.cyclic_factor.load(Ordering::Relaxed),
            cyclic_solve: self.cyclic_solve.load(Ordering::Relaxed),
            sparse_factor: self.sparse_factor.load(Ordering::Relaxed),
            sparse_solve: self.sparse_solve.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        for c in [
            &self.tridiag_factor,
            &self.tridiag_solve,
            &self.cyclic_factor,
            &self.cyclic_solve,
            &self.sparse_factor,
            &self.sparse_solve,
        ] {
            c.store(0, Ordering::Relaxed);
        }
    }
}

impl Default for FlopCounters {
    fn default() -> Self {
        Self::new()
    }
}

impl FlopSnapshot {
    /// Counts accumulated since `earlier`.
    pub fn since(&self, earlier: &FlopSnapshot) -> FlopSnapshot {
        FlopSnapshot {
            tridiag_factor: self.tridiag_factor - earlier.tridiag_factor,
            tridiag_solve: self.tridiag_solve - earlier.tridiag_solve,
            cyclic_factor: self.cyclic_factor - earlier.cyclic_factor,
            cyclic_solve: self.cyclic_solve - earlier.cyclic_solve,
            sparse_factor: self.sparse_factor - earlier.sparse_factor,
            sparse_solve: self.sparse_solve - earlier.sparse_solve,
        }
    }
}

/// Process-wide counters updated by every kernel.
pub static FLOPS: FlopCounters = FlopCounters::new();

#[inline]
pub(crate) fn count(counter: &AtomicU64, ops: u64) {
    counter.fetch_add(ops, Ordering::Relaxed);
}
