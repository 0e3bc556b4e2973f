use rayon::prelude::*;

use super::metric::{cosine_from_parts, dot, squared_euclidean, Metric};
use crate::dataio::DataMatrix;
use crate::error::{Error, Result};

/// Directed nearest-neighbor graph: row `i` lists the `nn` closest other rows,
/// nearest first, ties resolved toward the lower index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    m: usize,
    nn: usize,
    indices: Vec<u32>,
    distances: Vec<f32>,
    metric: Metric,
    source_hash: [u8; 32],
}

impl NeighborGraph {
    /// Builds a graph from raw rows, checking range, self-loop and duplicate invariants.
    pub fn from_parts(
        m: usize,
        nn: usize,
        indices: Vec<u32>,
        distances: Vec<f32>,
        metric: Metric,
        source_hash: [u8; 32],
    ) -> Result<Self> {
        if nn == 0 || nn >= m {
            return Err(Error::argument(format!("neighbor count {nn} invalid for {m} points")));
        }
        if indices.len() != m * nn || distances.len() != m * nn {
            return Err(Error::Consistency(format!(
                "{} indices / {} distances for a {m}x{nn} neighbor graph",
                indices.len(),
                distances.len()
            )));
        }
        let mut scratch = Vec::with_capacity(nn);
        for (i, row) in indices.chunks_exact(nn).enumerate() {
            scratch.clear();
            scratch.extend_from_slice(row);
            scratch.sort_unstable();
            if scratch.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Consistency(format!("row {i} repeats a neighbor")));
            }
            if let Some(&bad) = row.iter().find(|&&j| j as usize >= m || j as usize == i) {
                return Err(Error::Consistency(format!("row {i} has invalid neighbor {bad}")));
            }
        }
        Ok(Self {
            m,
            nn,
            indices,
            distances,
            metric,
            source_hash,
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn nn(&self) -> usize {
        self.nn
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn source_hash(&self) -> &[u8; 32] {
        &self.source_hash
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.indices[i * self.nn..(i + 1) * self.nn]
    }

    #[inline]
    pub fn neighbor_distances(&self, i: usize) -> &[f32] {
        &self.distances[i * self.nn..(i + 1) * self.nn]
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn distances(&self) -> &[f32] {
        &self.distances
    }

    /// Keeps only the first `nn` neighbors of every row.
    pub fn truncated(&self, nn: usize) -> Result<Self> {
        if nn == 0 || nn > self.nn {
            return Err(Error::argument(format!(
                "cannot truncate a depth-{} graph to {nn} neighbors",
                self.nn
            )));
        }
        let mut indices = Vec::with_capacity(self.m * nn);
        let mut distances = Vec::with_capacity(self.m * nn);
        for i in 0..self.m {
            indices.extend_from_slice(&self.neighbors(i)[..nn]);
            distances.extend_from_slice(&self.neighbor_distances(i)[..nn]);
        }
        Ok(Self {
            indices,
            distances,
            nn,
            ..self.clone()
        })
    }
}

/// Backend for building neighbor graphs. Only the exact search ships.
pub trait NeighborSearch {
    fn search(&self, data: &DataMatrix, nn: usize, metric: Metric) -> Result<NeighborGraph>;
}

/// Brute-force search over all pairs.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactSearch;

impl NeighborSearch for ExactSearch {
    fn search(&self, data: &DataMatrix, nn: usize, metric: Metric) -> Result<NeighborGraph> {
        knn_exact(data, nn, metric)
    }
}

/// Bounded ascending list of `(distance, index)` candidates.
///
/// Candidates must be offered in increasing index order; a later candidate
/// only displaces an earlier one at strictly smaller distance.
struct Candidates {
    cap: usize,
    items: Vec<(f64, u32)>,
}

impl Candidates {
    fn new(cap: usize) -> Self {
        Self {
            cap,
            items: Vec::with_capacity(cap + 1),
        }
    }

    #[inline]
    fn offer(&mut self, d: f64, j: u32) {
        if self.items.len() == self.cap {
            if d >= self.items[self.cap - 1].0 {
                return;
            }
            self.items.pop();
        }
        let at = self.items.partition_point(|&(bd, _)| bd <= d);
        self.items.insert(at, (d, j));
    }
}

/// Query rows scanned together against each data row.
const QUERY_BLOCK: usize = 32;

/// Exact `nn` nearest neighbors of every row, in nondecreasing distance order.
///
/// Rows are processed in parallel on the current rayon pool. The result does
/// not depend on the number of workers.
pub fn knn_exact(data: &DataMatrix, nn: usize, metric: Metric) -> Result<NeighborGraph> {
    let m = data.rows();
    if nn == 0 || nn >= m {
        return Err(Error::argument(format!(
            "neighbor count {nn} must be in [1, {}) for {m} points",
            m
        )));
    }
    if nn > u16::MAX as usize || m > u32::MAX as usize {
        return Err(Error::argument("graph too large for 32-bit indices / 16-bit depth"));
    }
    let norms: Vec<f64> = match metric {
        Metric::Euclidean => Vec::new(),
        Metric::Cosine => {
            let norms: Vec<f64> = data.iter_rows().map(|r| dot(r, r)).collect();
            if let Some(i) = norms.iter().position(|&n| n == 0.0) {
                return Err(Error::Domain(format!("row {i} is a zero vector under cosine")));
            }
            norms
        }
    };

    // Queries are handled in blocks so each data row is read from memory once
    // per block rather than once per query.
    let mut indices = vec![0u32; m * nn];
    let mut distances = vec![0f32; m * nn];
    indices
        .par_chunks_mut(nn * QUERY_BLOCK)
        .zip(distances.par_chunks_mut(nn * QUERY_BLOCK))
        .enumerate()
        .for_each(|(block, (idx_out, dist_out))| {
            let first = block * QUERY_BLOCK;
            let count = idx_out.len() / nn;
            let mut best: Vec<Candidates> = (0..count).map(|_| Candidates::new(nn)).collect();
            for j in 0..m {
                let other = data.row(j);
                for (q, cand) in best.iter_mut().enumerate() {
                    let i = first + q;
                    if j == i {
                        continue;
                    }
                    let query = data.row(i);
                    let d = match metric {
                        Metric::Euclidean => squared_euclidean(query, other).sqrt(),
                        Metric::Cosine => cosine_from_parts(dot(query, other), norms[i], norms[j]),
                    };
                    cand.offer(d, j as u32);
                }
            }
            for (q, cand) in best.iter().enumerate() {
                for (k, &(d, j)) in cand.items.iter().enumerate() {
                    idx_out[q * nn + k] = j;
                    dist_out[q * nn + k] = d as f32;
                }
            }
        });

    Ok(NeighborGraph {
        m,
        nn,
        indices,
        distances,
        metric,
        source_hash: data.checksum(),
    })
}
