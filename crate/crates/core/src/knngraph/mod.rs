//! Distances, exact nearest-neighbor search, neighbor caching and random-edge augmentation.

mod augment;
mod cache;
mod metric;
mod search;

pub use self::augment::{augment, sample_random_neighbors, AugmentedEdges, ResampleMode};
pub use self::cache::{
    load_neighbor_cache, read_cache_header, save_neighbor_cache, CacheHeader, CACHE_HEADER_LEN, CACHE_MAGIC,
    CACHE_VERSION,
};
pub use self::metric::{distance, Metric};
pub use self::search::{knn_exact, ExactSearch, NeighborGraph, NeighborSearch};

use crate::error::{Error, Result};

/// Minimum number of bars that keeps `m` joints rigid in `n` dimensions:
/// `n*m - n*(n+1)/2`.
pub fn min_rigid_edges(n: u64, m: u64) -> Result<u64> {
    if n == 0 || m < n {
        return Err(Error::argument(format!(
            "rigidity bound needs m >= n >= 1 (got n={n}, m={m})"
        )));
    }
    Ok(n * m - n * (n + 1) / 2)
}
