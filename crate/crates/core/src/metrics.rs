//! Embedding quality: leave-one-out class purity of nearest neighbors and
//! recovery of the source neighbor graph.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::dataio::{DataMatrix, Labels};
use crate::engine::LayoutState;
use crate::error::{Error, Result};
use crate::knngraph::{knn_exact, Metric, NeighborGraph};

/// Which space the points of a report live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Space {
    Source,
    #[default]
    Target,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::Source => "source",
            Space::Target => "target",
        })
    }
}

/// Purity curve `cf_nn` for `nn = 1..=nn_max` and its mean `cf`.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    /// `curve[k - 1]` is `cf_nn` at `nn = k`.
    pub curve: Vec<f64>,
    pub cf: f64,
    pub nn_max: usize,
    pub space: Space,
}

impl QualityReport {
    pub fn in_space(mut self, space: Space) -> Self {
        self.space = space;
        self
    }

    pub fn cf_nn(&self, nn: usize) -> Option<f64> {
        nn.checked_sub(1).and_then(|k| self.curve.get(k)).copied()
    }

    /// `nn,cf_nn` rows after `#` comment lines and a summary comment.
    pub fn write_csv(&self, out: &mut dyn Write, comments: &[String]) -> Result<()> {
        for line in comments {
            writeln!(out, "# {line}")?;
        }
        writeln!(
            out,
            "# summary: cf={} nn_max={} space={}",
            self.cf, self.nn_max, self.space
        )?;
        writeln!(out, "nn,cf_nn")?;
        for (k, v) in self.curve.iter().enumerate() {
            writeln!(out, "{},{v}", k + 1)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_csv(&mut out, comments)?;
        out.flush()?;
        Ok(())
    }
}

fn check_inputs(points: &DataMatrix, labels: &Labels, nn: usize) -> Result<()> {
    labels.check_len(points.rows())?;
    if nn == 0 || nn >= points.rows() {
        return Err(Error::argument(format!(
            "nn = {nn} must be in [1, {}) for {} points",
            points.rows(),
            points.rows()
        )));
    }
    Ok(())
}

/// Same-class counts for every neighbor depth, from one search of depth `nn_max`.
fn purity_curve(graph: &NeighborGraph, labels: &Labels, nn_max: usize) -> Vec<f64> {
    let m = graph.len();
    // hits[k] = number of (i, rank k) pairs whose neighbor shares i's class.
    let mut hits = vec![0u64; nn_max];
    for i in 0..m {
        let own = labels.get(i);
        for (k, &j) in graph.neighbors(i)[..nn_max].iter().enumerate() {
            if labels.get(j as usize) == own {
                hits[k] += 1;
            }
        }
    }
    let mut cumulative = 0u64;
    hits.iter()
        .enumerate()
        .map(|(k, &h)| {
            cumulative += h;
            cumulative as f64 / ((k + 1) as f64 * m as f64)
        })
        .collect()
}

/// Fraction of the `nn` nearest neighbors that share the point's class, averaged over points.
pub fn cf_nn(points: &DataMatrix, labels: &Labels, nn: usize, metric: Metric) -> Result<f64> {
    Ok(*cf(points, labels, nn, metric)?.curve.last().expect("nn >= 1"))
}

/// `cf_nn` for every `nn` up to `nn_max` and their mean.
pub fn cf(points: &DataMatrix, labels: &Labels, nn_max: usize, metric: Metric) -> Result<QualityReport> {
    check_inputs(points, labels, nn_max)?;
    if labels.class_count() <= 1 {
        log::warn!("cf on a single-class labeling is trivially 1");
        return Ok(QualityReport {
            curve: vec![1.0; nn_max],
            cf: 1.0,
            nn_max,
            space: Space::Target,
        });
    }
    let graph = knn_exact(points, nn_max, metric)?;
    let curve = purity_curve(&graph, labels, nn_max);
    let cf = curve.iter().sum::<f64>() / nn_max as f64;
    Ok(QualityReport {
        curve,
        cf,
        nn_max,
        space: Space::Target,
    })
}

/// `min(100, smallest class size - 1)`, at least 1.
pub fn default_nn_max(labels: &Labels) -> usize {
    let smallest = labels.class_sizes().into_iter().filter(|&s| s > 0).min().unwrap_or(1);
    smallest.saturating_sub(1).clamp(1, 100)
}

/// Share of each point's first `nn` reference neighbors that are also among its
/// `nn` nearest neighbors in the embedding, averaged over points.
pub fn knn_recovery(embedding: &LayoutState, reference: &NeighborGraph, nn: usize) -> Result<f64> {
    if nn == 0 || nn > reference.nn() {
        return Err(Error::argument(format!("nn = {nn} must be in [1, {}]", reference.nn())));
    }
    if embedding.len() != reference.len() {
        return Err(Error::Consistency(format!(
            "embedding has {} points, reference graph {}",
            embedding.len(),
            reference.len()
        )));
    }
    let target = knn_exact(&embedding.to_matrix(), nn, Metric::Euclidean)?;
    let mut hits = 0usize;
    for i in 0..reference.len() {
        let got = target.neighbors(i);
        hits += reference.neighbors(i)[..nn].iter().filter(|j| got.contains(j)).count();
    }
    Ok(hits as f64 / (nn * reference.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::synth_blobs;
    use crate::knngraph::distance;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Per-point full scan: sort everyone else by (distance, index) and count classes.
    fn naive_cf_nn(points: &DataMatrix, labels: &Labels, nn: usize, metric: Metric) -> f64 {
        let m = points.rows();
        let mut same = 0usize;
        for i in 0..m {
            let mut others: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| (distance(metric, points.row(i), points.row(j)).unwrap(), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            same += others[..nn]
                .iter()
                .filter(|&&(_, j)| labels.get(j) == labels.get(i))
                .count();
        }
        same as f64 / (nn * m) as f64
    }

    fn random_points(m: usize, dims: usize, k: u32, seed: u64) -> (DataMatrix, Labels) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..m * dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ids: Vec<u32> = (0..m).map(|_| rng.random_range(0..k)).collect();
        (DataMatrix::new(m, dims, values).unwrap(), Labels::from_ids(ids))
    }

    #[test]
    fn separated_blobs_are_pure() {
        let (data, labels) = synth_blobs(200, 4, 2, 0.1, 3).unwrap();
        assert_eq!(cf_nn(&data, &labels, 1, Metric::Euclidean).unwrap(), 1.0);
        let report = cf(&data, &labels, 99, Metric::Euclidean).unwrap();
        assert_eq!(report.cf, 1.0);
    }

    #[test]
    fn four_collinear_points() {
        let data = DataMatrix::from_rows(&[[0.0], [1.0], [10.0], [11.0]]).unwrap();
        let labels = Labels::from_ids(vec![0, 0, 1, 1]);
        assert_eq!(cf_nn(&data, &labels, 1, Metric::Euclidean).unwrap(), 1.0);
        // nn = 2: each point's second neighbor is across the gap.
        assert_eq!(cf_nn(&data, &labels, 2, Metric::Euclidean).unwrap(), 0.5);
    }

    #[test]
    fn random_labels_score_one_over_k() {
        let (data, labels) = random_points(5000, 2, 10, 17);
        let v = cf_nn(&data, &labels, 10, Metric::Euclidean).unwrap();
        assert!((v - 0.1).abs() < 0.02, "{v}");
    }

    #[test]
    fn single_class_is_one() {
        let (data, _) = random_points(50, 3, 1, 2);
        let labels = Labels::from_ids(vec![0; 50]);
        let report = cf(&data, &labels, 10, Metric::Euclidean).unwrap();
        assert_eq!(report.cf, 1.0);
        assert!(report.curve.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn first_point_of_curve_is_cf_nn_one() {
        let (data, labels) = random_points(300, 3, 4, 8);
        let one = cf(&data, &labels, 1, Metric::Euclidean).unwrap();
        assert_eq!(one.cf, cf_nn(&data, &labels, 1, Metric::Euclidean).unwrap());
        let deep = cf(&data, &labels, 20, Metric::Euclidean).unwrap();
        assert_eq!(deep.cf_nn(1), Some(one.cf));
        assert!(cf(&data, &labels, 300, Metric::Euclidean).is_err());
    }

    #[test]
    fn default_depth_follows_smallest_class() {
        let labels = Labels::from_ids((0..1000).map(|i| u32::from(i >= 980)).collect());
        assert_eq!(default_nn_max(&labels), 19);
        let big = Labels::from_ids((0..5000).map(|i| (i % 2) as u32).collect());
        assert_eq!(default_nn_max(&big), 100);
    }

    #[test]
    fn isometric_copy_recovers_every_edge() {
        let (data, _) = random_points(200, 2, 2, 9);
        let graph = knn_exact(&data, 5, Metric::Euclidean).unwrap();
        // Rotation by 90 degrees plus a dyadic shift is exact in floating point.
        let moved: Vec<[f64; 2]> = data.iter_rows().map(|r| [-r[1] + 0.5, r[0] - 0.25]).collect();
        let layout = LayoutState::from_positions(moved).unwrap();
        assert_eq!(knn_recovery(&layout, &graph, 5).unwrap(), 1.0);
    }

    #[test]
    fn random_embedding_recovers_about_chance() {
        let (data, _) = random_points(2000, 8, 2, 10);
        let graph = knn_exact(&data, 10, Metric::Euclidean).unwrap();
        let layout = crate::engine::init_layout(2000, 11).unwrap();
        let r = knn_recovery(&layout, &graph, 10).unwrap();
        let chance = 10.0 / 1999.0;
        assert!(r < 3.0 * chance, "{r} vs {chance}");
    }

    #[test]
    fn report_csv_layout() {
        let report = QualityReport {
            curve: vec![1.0, 0.75],
            cf: 0.875,
            nn_max: 2,
            space: Space::Target,
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf, &["run=x".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# run=x\n# summary: cf=0.875 nn_max=2 space=target\nnn,cf_nn\n1,1\n2,0.75\n"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn cf_nn_equals_naive_recount(
            m in 5usize..160,
            dims in 1usize..4,
            k in 2u32..5,
            seed in any::<u64>(),
            nn_frac in 0.0f64..1.0,
        ) {
            let (data, labels) = random_points(m, dims, k, seed);
            prop_assume!(labels.class_count() > 1);
            let nn = 1 + ((m - 2) as f64 * nn_frac) as usize;
            let fast = cf_nn(&data, &labels, nn, Metric::Euclidean).unwrap();
            let slow = naive_cf_nn(&data, &labels, nn, Metric::Euclidean);
            prop_assert!((fast - slow).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&fast));
        }

        #[test]
        fn cf_nn_is_invariant_under_exact_similarities(
            m in 5usize..120,
            seed in any::<u64>(),
            flip in any::<bool>(),
            quarter_turns in 0u8..4,
            scale_pow in -6i32..6,
        ) {
            let (data, labels) = random_points(m, 2, 3, seed);
            prop_assume!(labels.class_count() > 1);
            let s = 2f64.powi(scale_pow);
            let moved: Vec<[f64; 2]> = data.iter_rows().map(|r| {
                let (mut x, mut y) = (r[0], r[1]);
                if flip { x = -x; }
                for _ in 0..quarter_turns { (x, y) = (-y, x); }
                [s * x, s * y]
            }).collect();
            let moved = DataMatrix::from_rows(&moved).unwrap();
            let nn = (m / 3).max(1);
            prop_assert_eq!(
                cf_nn(&data, &labels, nn, Metric::Euclidean).unwrap(),
                cf_nn(&moved, &labels, nn, Metric::Euclidean).unwrap()
            );
        }
    }
}
