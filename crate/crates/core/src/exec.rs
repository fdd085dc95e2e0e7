//! Execution context: sequential or a dedicated rayon pool.
//!
//! Every parallel code path in this crate produces results that are bitwise
//! identical to the sequential path: elementwise kernels write disjoint
//! outputs computed by fixed expressions, and reductions go through the
//! order-invariant accumulator in [`crate::reduce`]. The choice here is purely
//! about speed. Without the `parallel` feature only the sequential variant
//! exists.

#[cfg(feature = "parallel")]
use std::sync::Arc;

/// Worker configuration for solver-sized kernels.
#[derive(Clone)]
pub enum Parallelism {
    Sequential,
    #[cfg(feature = "parallel")]
    Pool(Arc<rayon::ThreadPool>),
}

impl Parallelism {
    /// A context running on `workers` threads; 1 (or a failed pool build,
    /// or a build without the `parallel` feature) means sequential.
    pub fn from_workers(workers: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            if workers > 1 {
                if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                    return Parallelism::Pool(Arc::new(pool));
                }
            }
        }
        let _ = workers;
        Parallelism::Sequential
    }

    pub fn workers(&self) -> usize {
        match self {
            Parallelism::Sequential => 1,
            #[cfg(feature = "parallel")]
            Parallelism::Pool(pool) => pool.current_num_threads(),
        }
    }
}

impl std::fmt::Debug for Parallelism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Parallelism({} workers)", self.workers())
    }
}

/// Slice length per parallel work item for elementwise kernels and
/// reduction chunks.
#[cfg(feature = "parallel")]
pub(crate) const CHUNK: usize = 1 << 15;
