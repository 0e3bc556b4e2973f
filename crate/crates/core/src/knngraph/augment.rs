use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::search::NeighborGraph;
use crate::error::{Error, Result};

/// When the random neighbors are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleMode {
    /// Once, when the edges are built.
    #[default]
    Fixed,
    /// Afresh before every iteration.
    PerIteration,
}

impl fmt::Display for ResampleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResampleMode::Fixed => "fixed",
            ResampleMode::PerIteration => "per_iteration",
        })
    }
}

impl FromStr for ResampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(ResampleMode::Fixed),
            "per_iteration" | "per-iteration" => Ok(ResampleMode::PerIteration),
            other => Err(Error::argument(format!("unknown resample mode `{other}`"))),
        }
    }
}

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Small counter-based generator keyed by `(seed, iteration, point)`.
struct KeyedRng {
    state: u64,
}

impl KeyedRng {
    fn new(seed: u64, iteration: u64, point: usize) -> Self {
        let key = mix(seed ^ mix(iteration.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ mix(point as u64)));
        Self { state: key }
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        mix(self.state)
    }

    /// Uniform in `[0, n)` (multiply-shift with rejection).
    #[inline]
    fn below(&mut self, n: u64) -> u64 {
        let threshold = n.wrapping_neg() % n;
        loop {
            let wide = u128::from(self.next_u64()) * u128::from(n);
            if (wide as u64) >= threshold {
                return (wide >> 64) as u64;
            }
        }
    }
}

/// Draws `out.len()` distinct indices uniformly from `[0, m) \ ({point} ∪ exclude)`.
///
/// A pure function of its arguments.
pub fn sample_random_neighbors(seed: u64, iteration: u64, point: usize, m: usize, exclude: &[u32], out: &mut [u32]) {
    let rn = out.len();
    let mut rng = KeyedRng::new(seed, iteration, point);
    let taken = |j: u32, chosen: &[u32]| j as usize == point || exclude.contains(&j) || chosen.contains(&j);
    let available = m - 1 - exclude.len();
    debug_assert!(rn <= available);
    if 2 * rn <= available {
        let mut filled = 0;
        while filled < rn {
            let j = rng.below(m as u64) as u32;
            if !taken(j, &out[..filled]) {
                out[filled] = j;
                filled += 1;
            }
        }
    } else {
        let mut pool: Vec<u32> = (0..m as u32).filter(|&j| !taken(j, &[])).collect();
        for k in 0..rn {
            let pick = k + rng.below((pool.len() - k) as u64) as usize;
            pool.swap(k, pick);
        }
        out.copy_from_slice(&pool[..rn]);
    }
}

/// Nearest-neighbor edges plus random edges for every point.
///
/// Nearest lists may differ in length (after point removal); every point has
/// exactly `rn` random neighbors, disjoint from its nearest neighbors and itself.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedEdges {
    m: usize,
    nn_offsets: Vec<usize>,
    nn_indices: Vec<u32>,
    rn: usize,
    rn_indices: Vec<u32>,
    mode: ResampleMode,
    seed: u64,
    sampled_for: u64,
}

/// Connects every point to its first `use_nn` cached neighbors and `rn` random points.
pub fn augment(
    graph: &NeighborGraph,
    rn: usize,
    use_nn: usize,
    mode: ResampleMode,
    seed: u64,
) -> Result<AugmentedEdges> {
    if use_nn > graph.nn() {
        return Err(Error::argument(format!(
            "{use_nn} nearest neighbors requested from a depth-{} cache",
            graph.nn()
        )));
    }
    let lists = (0..graph.len()).map(|i| &graph.neighbors(i)[..use_nn]);
    AugmentedEdges::build(graph.len(), lists, rn, mode, seed)
}

impl AugmentedEdges {
    /// Builds edges from explicit nearest-neighbor lists.
    pub fn from_nn_lists<L: AsRef<[u32]>>(lists: &[L], rn: usize, mode: ResampleMode, seed: u64) -> Result<Self> {
        let m = lists.len();
        for (i, list) in lists.iter().enumerate() {
            let list = list.as_ref();
            if let Some(&bad) = list.iter().find(|&&j| j as usize >= m || j as usize == i) {
                return Err(Error::argument(format!("point {i} has invalid neighbor {bad}")));
            }
            let mut sorted = list.to_vec();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::argument(format!("point {i} repeats a neighbor")));
            }
        }
        Self::build(m, lists.iter().map(|l| l.as_ref()), rn, mode, seed)
    }

    fn build<'a>(
        m: usize,
        lists: impl Iterator<Item = &'a [u32]>,
        rn: usize,
        mode: ResampleMode,
        seed: u64,
    ) -> Result<Self> {
        if rn == 0 {
            return Err(Error::argument("at least one random neighbor is required"));
        }
        let mut nn_offsets = Vec::with_capacity(m + 1);
        let mut nn_indices = Vec::new();
        nn_offsets.push(0);
        let mut widest = 0;
        for list in lists {
            nn_indices.extend_from_slice(list);
            nn_offsets.push(nn_indices.len());
            widest = widest.max(list.len());
        }
        if m <= widest + rn {
            return Err(Error::argument(format!(
                "{m} points cannot supply {widest} nearest plus {rn} random neighbors"
            )));
        }
        let mut edges = Self {
            m,
            nn_offsets,
            nn_indices,
            rn,
            rn_indices: vec![0; m * rn],
            mode,
            seed,
            sampled_for: 0,
        };
        edges.sample(0);
        Ok(edges)
    }

    fn sample(&mut self, iteration: u64) {
        let (m, seed, rn) = (self.m, self.seed, self.rn);
        let offsets = &self.nn_offsets;
        let nn = &self.nn_indices;
        self.rn_indices.par_chunks_mut(rn).enumerate().for_each(|(i, out)| {
            let exclude = &nn[offsets[i]..offsets[i + 1]];
            sample_random_neighbors(seed, iteration, i, m, exclude, out);
        });
        self.sampled_for = iteration;
    }

    /// Draws the random neighbors used by `iteration`. A no-op in fixed mode.
    pub fn prepare_iteration(&mut self, iteration: u64) {
        if self.mode == ResampleMode::PerIteration && self.sampled_for != iteration {
            self.sample(iteration);
        }
    }

    /// Changes the number of random neighbors, redrawing all of them.
    pub fn set_rn(&mut self, rn: usize) -> Result<()> {
        let widest = (0..self.m).map(|i| self.nn(i).len()).max().unwrap_or(0);
        if rn == 0 || self.m <= widest + rn {
            return Err(Error::argument(format!(
                "{rn} random neighbors not possible for {} points",
                self.m
            )));
        }
        self.rn = rn;
        self.rn_indices = vec![0; self.m * rn];
        let at = self.sampled_for;
        self.sample(at);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    #[inline]
    pub fn nn(&self, i: usize) -> &[u32] {
        &self.nn_indices[self.nn_offsets[i]..self.nn_offsets[i + 1]]
    }

    #[inline]
    pub fn rn(&self, i: usize) -> &[u32] {
        &self.rn_indices[i * self.rn..(i + 1) * self.rn]
    }

    pub fn rn_count(&self) -> usize {
        self.rn
    }

    pub fn mode(&self) -> ResampleMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of stored nearest-neighbor indices (the persistent part).
    pub fn nn_index_count(&self) -> usize {
        self.nn_indices.len()
    }

    /// Total directed edges, nearest plus random.
    pub fn edge_count(&self) -> usize {
        self.nn_indices.len() + self.rn_indices.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::DataMatrix;
    use crate::knngraph::{knn_exact, Metric};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_graph(m: usize, nn: usize, seed: u64) -> NeighborGraph {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..m * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        knn_exact(&DataMatrix::new(m, 4, values).unwrap(), nn, Metric::Euclidean).unwrap()
    }

    #[test]
    fn toy_sized_graph_has_three_edges_per_point() {
        let g = random_graph(38, 2, 1);
        let e = augment(&g, 1, 2, ResampleMode::Fixed, 5).unwrap();
        for i in 0..38 {
            assert_eq!(e.nn(i).len() + e.rn(i).len(), 3);
        }
        assert_eq!(e.edge_count(), 3 * 38);
        assert_eq!(e.nn_index_count(), 2 * 38);
    }

    #[test]
    fn fixed_mode_is_deterministic() {
        let g = random_graph(100, 5, 2);
        let a = augment(&g, 3, 4, ResampleMode::Fixed, 77).unwrap();
        let mut b = augment(&g, 3, 4, ResampleMode::Fixed, 77).unwrap();
        b.prepare_iteration(12);
        assert_eq!(a, b);
        let c = augment(&g, 3, 4, ResampleMode::Fixed, 78).unwrap();
        assert_ne!(a.rn_indices, c.rn_indices);
    }

    #[test]
    fn exhausting_the_complement_takes_everything() {
        let g = random_graph(12, 4, 3);
        let e = augment(&g, 12 - 3 - 1, 3, ResampleMode::Fixed, 1).unwrap();
        for i in 0..12 {
            let mut all: Vec<u32> = e.nn(i).iter().chain(e.rn(i)).copied().collect();
            all.push(i as u32);
            all.sort_unstable();
            assert_eq!(all, (0..12).collect::<Vec<u32>>());
        }
        assert!(augment(&g, 12 - 3, 3, ResampleMode::Fixed, 1).is_err());
    }

    #[test]
    fn argument_checks() {
        let g = random_graph(20, 3, 4);
        assert!(augment(&g, 1, 4, ResampleMode::Fixed, 0).is_err());
        assert!(augment(&g, 0, 2, ResampleMode::Fixed, 0).is_err());
        assert!(AugmentedEdges::from_nn_lists(&[vec![1u32], vec![1]], 1, ResampleMode::Fixed, 0).is_err());
    }

    #[test]
    fn per_iteration_resampling_is_keyed_by_iteration() {
        let g = random_graph(200, 3, 5);
        let mut e = augment(&g, 2, 3, ResampleMode::PerIteration, 9).unwrap();
        let first = e.rn_indices.clone();
        e.prepare_iteration(1);
        let second = e.rn_indices.clone();
        assert_ne!(first, second);
        e.prepare_iteration(0);
        assert_eq!(e.rn_indices, first);
        let mut other = augment(&g, 2, 3, ResampleMode::PerIteration, 9).unwrap();
        other.prepare_iteration(1);
        assert_eq!(other.rn_indices, second);
    }

    #[test]
    fn random_draws_are_roughly_uniform() {
        let mut counts = [0usize; 10];
        for it in 0..20_000u64 {
            let mut out = [0u32; 1];
            sample_random_neighbors(3, it, 0, 10, &[1], &mut out);
            counts[out[0] as usize] += 1;
        }
        assert_eq!(counts[0] + counts[1], 0);
        for &c in &counts[2..] {
            assert!((2200..2800).contains(&c), "{counts:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn random_sets_avoid_self_and_nearest(
            m in 4usize..120,
            seed in any::<u64>(),
            nn_frac in 0.0f64..1.0,
            rn_frac in 0.0f64..1.0,
        ) {
            let nn = 1 + ((m - 3) as f64 * nn_frac) as usize;
            let g = random_graph(m, nn, seed);
            let rn = 1 + ((m - nn - 2) as f64 * rn_frac) as usize;
            let e = augment(&g, rn, nn, ResampleMode::Fixed, seed).unwrap();
            for i in 0..m {
                let r = e.rn(i);
                prop_assert_eq!(r.len(), rn);
                prop_assert!(!r.contains(&(i as u32)));
                prop_assert!(r.iter().all(|j| !e.nn(i).contains(j)));
                let mut sorted = r.to_vec();
                sorted.sort_unstable();
                sorted.dedup();
                prop_assert_eq!(sorted.len(), rn);
            }
        }
    }
}
