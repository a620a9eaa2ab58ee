//! Principal component analysis by eigendecomposition of the sample
//! covariance.
//!
//! Used to project the data onto 2-3 axes for display and as the
//! low-dimensional front end of the mixture-component scan. The covariance
//! divisor is `n - 1`, matching [`crate::data::standardize`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PcaError {
    #[error("component count {k} outside 1..={max}")]
    InvalidK { k: usize, max: usize },
    #[error("requested {k} components but numerical rank is {rank}")]
    RankDeficient { k: usize, rank: usize },
    #[error("matrix has {got} columns, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A fitted PCA basis.
///
/// `components` rows are unit-norm principal axes in descending eigenvalue
/// order, with the deterministic sign convention that each axis's
/// largest-magnitude entry is positive.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `k x p`, one axis per row.
    pub components: DMatrix<f64>,
    /// Variances along the axes, descending, clamped to be nonnegative.
    pub eigenvalues: DVector<f64>,
    /// Trace of the sample covariance (sum of all `p` eigenvalues).
    pub total_variance: f64,
}

/// Fit a `k`-component PCA to the rows of `x`.
pub fn fit_pca(x: &DMatrix<f64>, k: usize) -> Result<PcaModel, PcaError> {
    let n = x.nrows();
    let p = x.ncols();
    assert!(n >= 2, "fit_pca needs at least two rows");
    let max_k = (n - 1).min(p);
    if k < 1 || k > max_k {
        return Err(PcaError::InvalidK { k, max: max_k });
    }

    let mean = DVector::from_fn(p, |j, _| x.column(j).sum() / n as f64);
    let mut centered = x.clone();
    for j in 0..p {
        for i in 0..n {
            centered[(i, j)] -= mean[j];
        }
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let total_variance = cov.trace();

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let rank_tol = 1e-12 * total_variance;
    let rank = order
        .iter()
        .take_while(|&&i| eig.eigenvalues[i] > rank_tol)
        .count();
    if k > rank {
        return Err(PcaError::RankDeficient { k, rank });
    }

    let mut components = DMatrix::zeros(k, p);
    let mut eigenvalues = DVector::zeros(k);
    for (row, &i) in order.iter().take(k).enumerate() {
        eigenvalues[row] = eig.eigenvalues[i].max(0.0);
        let axis = eig.eigenvectors.column(i);
        // largest-magnitude loading positive, first index winning exact ties
        let mut lead = 0;
        for j in 1..p {
            if axis[j].abs() > axis[lead].abs() {
                lead = j;
            }
        }
        let flip = if axis[lead] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..p {
            components[(row, j)] = flip * axis[j];
        }
    }

    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        total_variance,
    })
}

/// Project rows of `x` onto the model axes: `(x - mean) * components^T`.
pub fn project(m: &PcaModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>, PcaError> {
    if x.ncols() != m.mean.len() {
        return Err(PcaError::DimensionMismatch {
            expected: m.mean.len(),
            got: x.ncols(),
        });
    }
    let mut centered = x.clone();
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            centered[(i, j)] -= m.mean[j];
        }
    }
    Ok(centered * m.components.transpose())
}

/// Map scores back to the original space: `scores * components + mean`.
pub fn reconstruct(m: &PcaModel, scores: &DMatrix<f64>) -> Result<DMatrix<f64>, PcaError> {
    if scores.ncols() != m.components.nrows() {
        return Err(PcaError::DimensionMismatch {
            expected: m.components.nrows(),
            got: scores.ncols(),
        });
    }
    let mut out = scores * &m.components;
    for j in 0..out.ncols() {
        for i in 0..out.nrows() {
            out[(i, j)] += m.mean[j];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = substream(seed, "pca:test");
        DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn axis_aligned_data() {
        let x = DMatrix::from_row_slice(4, 3, &[
            1.0, 0.0, 0.0, //
            -2.0, 0.0, 0.0, //
            3.0, 0.0, 0.0, //
            0.5, 0.0, 0.0,
        ]);
        let m = fit_pca(&x, 1).unwrap();
        assert!((m.components[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(m.components[(0, 1)].abs() < 1e-12);
        assert!(m.components[(0, 2)].abs() < 1e-12);
        // everything off-axis is flat, so asking for a second axis is rank deficient
        assert!(matches!(fit_pca(&x, 2), Err(PcaError::RankDeficient { .. })));
    }

    #[test]
    fn full_rank_reconstruction() {
        let x = random_matrix(20, 5, 1);
        let m = fit_pca(&x, 5).unwrap();
        let scores = project(&m, &x).unwrap();
        let back = reconstruct(&m, &scores).unwrap();
        for (a, b) in x.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn projecting_the_mean_gives_zero() {
        let x = random_matrix(12, 4, 2);
        let m = fit_pca(&x, 3).unwrap();
        let mean_row = DMatrix::from_fn(1, 4, |_, j| m.mean[j]);
        let s = project(&m, &mean_row).unwrap();
        for v in s.iter() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn axes_are_orthonormal_and_eigenvalues_sorted() {
        let x = random_matrix(30, 6, 3);
        let m = fit_pca(&x, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let dot = m.components.row(i).dot(&m.components.row(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10, "axis {i} . axis {j} = {dot}");
            }
        }
        for i in 1..6 {
            assert!(m.eigenvalues[i] <= m.eigenvalues[i - 1]);
            assert!(m.eigenvalues[i] >= 0.0);
        }
        let sum: f64 = m.eigenvalues.iter().sum();
        assert!((sum - m.total_variance).abs() <= 1e-8 * m.total_variance.abs());
    }

    #[test]
    fn projection_variances_match_eigenvalues() {
        let x = random_matrix(40, 5, 4);
        let m = fit_pca(&x, 5).unwrap();
        let s = project(&m, &x).unwrap();
        let n = s.nrows() as f64;
        for j in 0..5 {
            let col = s.column(j);
            let mean = col.sum() / n;
            let var: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            let rel = (var - m.eigenvalues[j]).abs() / m.eigenvalues[j].max(1e-300);
            assert!(rel < 1e-8, "column {j}: var {var} vs eigenvalue {}", m.eigenvalues[j]);
        }
    }

    #[test]
    fn fit_invariant_under_row_permutation() {
        let x = random_matrix(15, 4, 5);
        let perm: Vec<usize> = vec![14, 3, 7, 0, 1, 2, 9, 8, 4, 5, 6, 13, 12, 10, 11];
        let xp = DMatrix::from_fn(15, 4, |i, j| x[(perm[i], j)]);
        let m1 = fit_pca(&x, 4).unwrap();
        let m2 = fit_pca(&xp, 4).unwrap();
        for (a, b) in m1.components.iter().zip(m2.components.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in m1.eigenvalues.iter().zip(m2.eigenvalues.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_k_errors() {
        let x = random_matrix(6, 4, 6);
        assert!(matches!(fit_pca(&x, 0), Err(PcaError::InvalidK { .. })));
        assert!(matches!(fit_pca(&x, 5), Err(PcaError::InvalidK { .. })));
        // n - 1 caps the count even when p is larger
        let tall = random_matrix(3, 10, 7);
        assert!(matches!(fit_pca(&tall, 3), Err(PcaError::InvalidK { .. })));
    }

    #[test]
    fn projection_dimension_mismatch() {
        let x = random_matrix(10, 4, 8);
        let m = fit_pca(&x, 2).unwrap();
        let bad = random_matrix(3, 5, 9);
        assert!(matches!(
            project(&m, &bad),
            Err(PcaError::DimensionMismatch { expected: 4, got: 5 })
        ));
    }
}
