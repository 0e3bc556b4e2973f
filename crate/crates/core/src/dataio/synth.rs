use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{DataMatrix, Labels};
use crate::error::{Error, Result};

/// Centroid distance of the two simplices, in edge lengths.
pub const DEFAULT_SIMPLEX_SEPARATION: f64 = 2.0;

/// Vertices of a regular unit-edge simplex in `dim` dimensions, centered at the origin.
fn regular_simplex(dim: usize) -> Vec<Vec<f64>> {
    // Vertex k is e_k / sqrt(2) in R^(dim+1), expressed in an orthonormal basis
    // of the hyperplane orthogonal to (1, ..., 1).
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    (0..=dim)
        .map(|k| {
            (1..=dim)
                .map(|m| {
                    let norm = ((m * (m + 1)) as f64).sqrt();
                    let coord = match k.cmp(&m) {
                        std::cmp::Ordering::Less => 1.0,
                        std::cmp::Ordering::Equal => -(m as f64),
                        std::cmp::Ordering::Greater => 0.0,
                    };
                    scale * coord / norm
                })
                .collect()
        })
        .collect()
}

/// Haar-distributed random orthogonal matrix.
fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut *rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Two regular unit-edge simplices with `dim + 1` vertices each.
///
/// The second copy is rotated about its centroid by a seeded random orthogonal
/// matrix and translated by `separation` along a random unit direction. Labels
/// are 0 for the first simplex and 1 for the second.
pub fn synth_simplex_pair(dim: usize, separation: f64, seed: u64) -> Result<(DataMatrix, Labels)> {
    if dim == 0 {
        return Err(Error::argument("simplex dimension must be at least 1"));
    }
    if !separation.is_finite() {
        return Err(Error::argument("simplex separation must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = regular_simplex(dim);
    let rotation = random_orthogonal(dim, &mut rng);
    let mut direction: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|v| *v /= norm);

    let mut values = Vec::with_capacity(2 * (dim + 1) * dim);
    for vertex in &base {
        values.extend_from_slice(vertex);
    }
    for vertex in &base {
        for r in 0..dim {
            let rotated: f64 = (0..dim).map(|c| rotation[(r, c)] * vertex[c]).sum();
            values.push(rotated + separation * direction[r]);
        }
    }
    let m = 2 * (dim + 1);
    let data = DataMatrix::new(m, dim, values)?.with_name(format!("simplex-pair-{dim}"));
    let labels = Labels::from_ids((0..m).map(|i| u32::from(i > dim)).collect());
    Ok((data, labels))
}

/// `k` isotropic Gaussian clusters with standard deviation `spread`.
///
/// Centers are uniform in `[-10, 10]^n`; row `i` belongs to cluster `i % k`.
pub fn synth_blobs(m: usize, n: usize, k: usize, spread: f64, seed: u64) -> Result<(DataMatrix, Labels)> {
    if m == 0 || n == 0 || k == 0 {
        return Err(Error::argument("blobs need at least one row, feature and cluster"));
    }
    if k > m {
        return Err(Error::argument(format!("{k} clusters for only {m} rows")));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::argument(format!("invalid cluster spread {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<f64> = (0..k * n).map(|_| rng.random_range(-10.0..10.0)).collect();
    let noise = Normal::new(0.0, spread).map_err(|e| Error::argument(e.to_string()))?;
    let mut values = Vec::with_capacity(m * n);
    for i in 0..m {
        let c = &centers[(i % k) * n..(i % k + 1) * n];
        values.extend(c.iter().map(|&x| x + noise.sample(&mut rng)));
    }
    let data = DataMatrix::new(m, n, values)?.with_name(format!("blobs-{m}x{n}-k{k}"));
    let labels = Labels::from_ids((0..m).map(|i| (i % k) as u32).collect());
    Ok((data, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    fn centroid(data: &DataMatrix, rows: std::ops::Range<usize>) -> Vec<f64> {
        let count = rows.len() as f64;
        let mut c = vec![0.0; data.dims()];
        for i in rows {
            for (acc, v) in c.iter_mut().zip(data.row(i)) {
                *acc += v / count;
            }
        }
        c
    }

    #[test]
    fn eighteen_dimensional_pair_has_unit_edges() {
        let (data, labels) = synth_simplex_pair(18, DEFAULT_SIMPLEX_SEPARATION, 7).unwrap();
        assert_eq!(data.rows(), 38);
        assert_eq!(labels.class_sizes(), vec![19, 19]);
        let mut intra = Vec::new();
        for block in [0..19, 19..38] {
            for i in block.clone() {
                for j in (i + 1)..block.end {
                    intra.push(dist(data.row(i), data.row(j)));
                }
            }
        }
        let lo = intra.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = intra.iter().cloned().fold(0.0, f64::max);
        assert!((hi - lo) / lo < 1e-9, "spread {lo}..{hi}");
        assert!((lo - 1.0).abs() < 1e-9);
        let gap = dist(&centroid(&data, 0..19), &centroid(&data, 19..38));
        assert!((gap - DEFAULT_SIMPLEX_SEPARATION).abs() < 1e-9);
    }

    #[test]
    fn one_dimensional_pair_is_two_segments_ten_apart() {
        let (data, labels) = synth_simplex_pair(1, 10.0, 1).unwrap();
        assert_eq!(data.rows(), 4);
        assert_eq!(labels.ids(), &[0, 0, 1, 1]);
        assert!((dist(data.row(0), data.row(1)) - 1.0).abs() < 1e-12);
        assert!((dist(data.row(2), data.row(3)) - 1.0).abs() < 1e-12);
        let gap = dist(&centroid(&data, 0..2), &centroid(&data, 2..4));
        assert!((gap - 10.0).abs() < 1e-12);
    }

    #[test]
    fn tetrahedron_vertices_have_three_equidistant_siblings() {
        let (data, _) = synth_simplex_pair(3, 2.0, 11).unwrap();
        for i in 0..8 {
            let block = if i < 4 { 0..4 } else { 4..8 };
            let d: Vec<f64> = block
                .filter(|&j| j != i)
                .map(|j| dist(data.row(i), data.row(j)))
                .collect();
            assert_eq!(d.len(), 3);
            assert!(d.iter().all(|x| (x - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn generators_are_pure_functions_of_their_arguments() {
        let a = synth_blobs(50, 3, 4, 0.5, 9).unwrap();
        let b = synth_blobs(50, 3, 4, 0.5, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, synth_blobs(50, 3, 4, 0.5, 10).unwrap().0);
        assert_eq!(
            synth_simplex_pair(5, 2.0, 3).unwrap(),
            synth_simplex_pair(5, 2.0, 3).unwrap()
        );
    }

    #[test]
    fn zero_spread_puts_points_on_centers() {
        let (data, labels) = synth_blobs(30, 2, 3, 0.0, 2).unwrap();
        for i in 3..30 {
            assert_eq!(data.row(i), data.row(i % 3));
            assert_eq!(labels.get(i), labels.get(i % 3));
        }
    }

    #[test]
    fn single_blob_has_single_label() {
        let (_, labels) = synth_blobs(20, 2, 1, 1.0, 0).unwrap();
        assert!(labels.ids().iter().all(|&l| l == 0));
        assert!(synth_blobs(2, 2, 3, 1.0, 0).is_err());
    }
}
