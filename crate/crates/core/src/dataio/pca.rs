use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use super::DataMatrix;
use crate::error::{Error, Result};

/// Above this many features the covariance matrix is not formed explicitly.
const DENSE_COVARIANCE_LIMIT: usize = 4096;
const POWER_ITERATIONS: usize = 4;
const OVERSAMPLING: usize = 10;

#[derive(Debug, Clone)]
pub struct PcaOutput {
    /// Projected, mean-centered data.
    pub data: DataMatrix,
    /// Variance along each retained component, in decreasing order.
    pub component_variances: Vec<f64>,
    /// Retained variance divided by total variance.
    pub captured_variance: f64,
}

fn column_means(data: &DataMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; data.dims()];
    for row in data.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let inv = 1.0 / data.rows() as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    mean
}

fn centered(data: &DataMatrix, mean: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(data.rows(), data.dims(), |i, j| data.row(i)[j] - mean[j])
}

/// Projects rows onto the top `target_dims` principal components.
///
/// Uses an exact eigendecomposition of the covariance matrix for up to 4096
/// features and a randomized range finder (4 power iterations, 10 extra
/// columns) beyond that.
pub fn pca_reduce(data: &DataMatrix, target_dims: usize) -> Result<PcaOutput> {
    let limit = data.rows().min(data.dims());
    if target_dims == 0 || target_dims > limit {
        return Err(Error::argument(format!(
            "PCA target dimension {target_dims} outside [1, {limit}]"
        )));
    }
    let mean = column_means(data);
    let x = centered(data, &mean);
    let denom = (data.rows().max(2) - 1) as f64;
    let total_variance = x.iter().map(|v| v * v).sum::<f64>() / denom;

    let (basis, variances) = if data.dims() <= DENSE_COVARIANCE_LIMIT {
        dense_components(&x, target_dims, denom)
    } else {
        randomized_components(&x, target_dims, denom)
    };

    let projected = &x * &basis;
    let mut values = Vec::with_capacity(data.rows() * target_dims);
    for i in 0..data.rows() {
        values.extend(projected.row(i).iter().copied());
    }
    let mut out = DataMatrix::new(data.rows(), target_dims, values)?;
    if let Some(name) = data.name() {
        out = out.with_name(name);
    }
    let captured = if total_variance > 0.0 {
        (variances.iter().sum::<f64>() / total_variance).min(1.0)
    } else {
        1.0
    };
    Ok(PcaOutput {
        data: out,
        component_variances: variances,
        captured_variance: captured,
    })
}

/// Top eigenpairs of a symmetric matrix, eigenvalues descending.
fn top_eigen(sym: DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let n = eig.eigenvectors.nrows();
    let mut vectors = DMatrix::zeros(n, k);
    let mut values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        // Sign convention: largest-magnitude entry positive.
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
        values.push(eig.eigenvalues[src].max(0.0));
    }
    (vectors, values)
}

fn dense_components(x: &DMatrix<f64>, k: usize, denom: f64) -> (DMatrix<f64>, Vec<f64>) {
    let cov = (x.transpose() * x) / denom;
    top_eigen(cov, k)
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

fn randomized_components(x: &DMatrix<f64>, k: usize, denom: f64) -> (DMatrix<f64>, Vec<f64>) {
    let n = x.ncols();
    let width = (k + OVERSAMPLING).min(n).min(x.nrows());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_9ca0);
    let omega = DMatrix::from_fn(n, width, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormalize(x * omega);
    for _ in 0..POWER_ITERATIONS {
        let z = orthonormalize(x.transpose() * &q);
        q = orthonormalize(x * z);
    }
    // Restricted to the captured subspace: B = Q^T X, covariance of X ~ B^T B.
    let b = q.transpose() * x;
    let small = (&b * b.transpose()) / denom;
    let (u, values) = top_eigen(small, k);
    let mut basis = b.transpose() * u;
    for mut col in basis.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    (basis, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn pairwise(data: &DataMatrix) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..data.rows() {
            for j in i + 1..data.rows() {
                let d: f64 = data
                    .row(i)
                    .iter()
                    .zip(data.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                out.push(d.sqrt());
            }
        }
        out
    }

    #[test]
    fn target_out_of_range_is_rejected() {
        let data = DataMatrix::new(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(matches!(pca_reduce(&data, 0), Err(Error::Argument(_))));
        assert!(matches!(pca_reduce(&data, 3), Err(Error::Argument(_))));
    }

    #[test]
    fn affine_three_dimensional_subspace_is_fully_captured() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 100;
        let offset: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let dirs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut values = Vec::new();
        for _ in 0..200 {
            let coef: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            for j in 0..n {
                values.push(offset[j] + (0..3).map(|k| coef[k] * dirs[k][j]).sum::<f64>());
            }
        }
        let data = DataMatrix::new(200, n, values).unwrap();
        let out = pca_reduce(&data, 3).unwrap();
        assert!((out.captured_variance - 1.0).abs() < 1e-9, "{}", out.captured_variance);
    }

    #[test]
    fn full_rank_projection_preserves_distances_and_is_centered() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let values: Vec<f64> = (0..40 * 6).map(|_| rng.random_range(-3.0..3.0)).collect();
        let data = DataMatrix::new(40, 6, values).unwrap();
        let out = pca_reduce(&data, 6).unwrap();
        for (a, b) in pairwise(&data).iter().zip(pairwise(&out.data)) {
            assert!((a - b).abs() <= 1e-9 * a.max(1e-300), "{a} vs {b}");
        }
        for j in 0..6 {
            let mean: f64 = out.data.iter_rows().map(|r| r[j]).sum::<f64>() / 40.0;
            assert!(mean.abs() < 1e-9);
        }
        assert!(out.component_variances.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn randomized_path_matches_dense_path_on_low_rank_data() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (rows, n) = (60, 30);
        let dirs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let scales = [5.0, 3.0, 2.0, 1.0];
        let mut values = Vec::new();
        for _ in 0..rows {
            let coef: Vec<f64> = scales.iter().map(|s| s * rng.random_range(-1.0..1.0)).collect();
            for j in 0..n {
                values.push(coef.iter().zip(&dirs).map(|(c, d)| c * d[j]).sum::<f64>());
            }
        }
        let data = DataMatrix::new(rows, n, values).unwrap();
        let x = centered(&data, &column_means(&data));
        let (_, dense) = dense_components(&x, 3, (rows - 1) as f64);
        let (_, randomized) = randomized_components(&x, 3, (rows - 1) as f64);
        for (a, b) in dense.iter().zip(&randomized) {
            assert!((a - b).abs() < 1e-8 * a, "{a} vs {b}");
        }
    }
}
