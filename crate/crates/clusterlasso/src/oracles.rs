//! Slow reference implementations used by the test suites to cross-check the
//! production algorithms. Each one takes a route independent of the code it
//! validates: the eigensolver is a classical Jacobi iteration, and the
//! penalized least-squares minimum is found by exhaustive sign-pattern
//! enumeration. Nothing here is meant for production use.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::lasso::LassoProblem;
use crate::rng::substream;

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns. Quadratically convergent; intended for small matrices in tests.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let d = a.nrows();
    assert_eq!(d, a.ncols(), "matrix must be square");
    for i in 0..d {
        for j in 0..i {
            assert!(
                (a[(i, j)] - a[(j, i)]).abs() <= 1e-12 * a[(i, j)].abs().max(1.0),
                "matrix must be symmetric"
            );
        }
    }
    let mut m = a.clone();
    let mut v = DMatrix::identity(d, d);
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..d {
            for q in p + 1..d {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&i| m[(i, i)]));
    let mut eigenvectors = DMatrix::zeros(d, d);
    for (out, &src) in order.iter().enumerate() {
        eigenvectors.set_column(out, &v.column(src));
    }
    (eigenvalues, eigenvectors)
}

/// Penalized least-squares minimum by exhaustive enumeration of the 3^p
/// active-sign patterns. For each pattern the stationarity equations
/// `X_A'X_A b_A = X_A'y - lambda*s_A` give one candidate; the smallest true
/// objective over all candidates is the global minimum, because the optimal
/// pattern's candidate is the optimum itself and every candidate's objective
/// bounds it from above.
pub fn lasso_minimum_by_enumeration(prob: &LassoProblem, lambda: f64) -> (f64, DVector<f64>) {
    let p = prob.p();
    assert!(p <= 12, "enumeration is exponential in the feature count");
    let x = prob.x();
    let y = prob.y();
    let mut best_obj = prob.objective(&DVector::zeros(p), lambda);
    let mut best_b = DVector::zeros(p);
    let total = 3usize.pow(p as u32);
    for code in 1..total {
        let mut signs = Vec::with_capacity(p);
        let mut rem = code;
        for _ in 0..p {
            signs.push(match rem % 3 {
                0 => 0.0,
                1 => 1.0,
                _ => -1.0,
            });
            rem /= 3;
        }
        let active: Vec<usize> = (0..p).filter(|&j| signs[j] != 0.0).collect();
        if active.is_empty() {
            continue;
        }
        let xa = x.select_columns(active.iter());
        let g = xa.transpose() * &xa;
        let chol = match Cholesky::new(g) {
            Some(c) => c,
            None => continue,
        };
        let s = DVector::from_iterator(active.len(), active.iter().map(|&j| signs[j]));
        let rhs = xa.transpose() * y - s * lambda;
        let ba = chol.solve(&rhs);
        let mut b = DVector::zeros(p);
        for (idx, &j) in active.iter().enumerate() {
            b[j] = ba[idx];
        }
        let obj = prob.objective(&b, lambda);
        if obj < best_obj {
            best_obj = obj;
            best_b = b;
        }
    }
    (best_obj, best_b)
}

/// Objective value of [`lasso_minimum_by_enumeration`].
pub fn lasso_objective_by_enumeration(prob: &LassoProblem, lambda: f64) -> f64 {
    lasso_minimum_by_enumeration(prob, lambda).0
}

/// An n x p design whose columns are exactly centered, mutually orthogonal,
/// and of sample standard deviation one: the trailing columns of a QR basis
/// for `[ones | Gaussian]`, rescaled by `sqrt(n-1)`.
pub fn centered_orthonormal_design(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    assert!(n >= p + 2, "need n >= p + 2 rows");
    let mut rng = substream(seed, "oracle:design");
    let mut m = DMatrix::zeros(n, p + 1);
    for i in 0..n {
        m[(i, 0)] = 1.0;
        for j in 1..=p {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let q = m.qr().q();
    let scale = ((n - 1) as f64).sqrt();
    DMatrix::from_fn(n, p, |i, j| q[(i, j + 1)] * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonal_matrix_is_fixed_point() {
        let a = DMatrix::from_diagonal(&DVector::from_row_slice(&[3.0, 1.0, 7.0]));
        let (vals, vecs) = jacobi_eigen(&a);
        assert_eq!(vals.as_slice(), &[7.0, 3.0, 1.0]);
        for j in 0..3 {
            let col = vecs.column(j);
            assert!((col.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_reconstructs_its_input() {
        let a = DMatrix::from_row_slice(3, 3, &[
            4.0, 1.0, 0.5, //
            1.0, 3.0, -0.2, //
            0.5, -0.2, 2.0,
        ]);
        let (vals, vecs) = jacobi_eigen(&a);
        let lam = DMatrix::from_diagonal(&vals);
        let rebuilt = &vecs * lam * vecs.transpose();
        assert!((rebuilt - a).norm() < 1e-10);
        for w in vals.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn jacobi_known_2x2() {
        // eigenvalues of [[2,1],[1,2]] are 3 and 1
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = jacobi_eigen(&a);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[(0, 0)].abs() - inv_sqrt2).abs() < 1e-12);
    }

    #[test]
    fn design_columns_are_centered_orthogonal_unit_sd() {
        let n = 30;
        let p = 4;
        let x = centered_orthonormal_design(n, p, 5);
        for j in 0..p {
            let col = x.column(j);
            assert!(col.sum().abs() / (n as f64) < 1e-12);
            let sd = (col.norm_squared() / (n as f64 - 1.0)).sqrt();
            assert!((sd - 1.0).abs() < 1e-12);
            for k in 0..j {
                assert!(col.dot(&x.column(k)).abs() < 1e-10);
            }
        }
    }
}
