use ivhd::dataio::{pca_reduce, DataMatrix};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// Cyclic Jacobi rotations on a dense symmetric matrix; returns all eigenvalues.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (row_p, row_q) = (a[p].clone(), a[q].clone());
                for (k, (apk, aqk)) in row_p.into_iter().zip(row_q).enumerate() {
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut values: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values
}

#[test]
fn gaussian_component_variances_match_jacobi_oracle() {
    let (m, n, k) = (5000, 50, 10);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let values: Vec<f64> = (0..m * n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let data = DataMatrix::new(m, n, values).unwrap();

    let mut mean = vec![0.0; n];
    for row in data.iter_rows() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v / m as f64;
        }
    }
    let mut cov = vec![vec![0.0; n]; n];
    for row in data.iter_rows() {
        for p in 0..n {
            for q in 0..n {
                cov[p][q] += (row[p] - mean[p]) * (row[q] - mean[q]) / (m - 1) as f64;
            }
        }
    }
    let expected = jacobi_eigenvalues(cov);

    let out = pca_reduce(&data, k).unwrap();
    for (got, want) in out.component_variances.iter().zip(&expected[..k]) {
        assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
    }
    // The projected columns carry exactly those variances.
    for c in 0..k {
        let var: f64 = out.data.iter_rows().map(|r| r[c] * r[c]).sum::<f64>() / (m - 1) as f64;
        assert!((var - expected[c]).abs() <= 1e-6 * expected[c]);
    }
    let total: f64 = expected.iter().sum();
    let captured: f64 = expected[..k].iter().sum::<f64>() / total;
    assert!((out.captured_variance - captured).abs() < 1e-9);
}
