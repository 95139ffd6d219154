//! Dense symmetric numerics: orthonormalization, complements, PSD square roots.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    /// The matrix has an eigenvalue below `-tol`.
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:.3e} < -{tol:.1e}")]
    NotPsd { min_eig: f64, tol: f64 },
}

/// Orthonormal spanning set of the row space of `rows`, by modified
/// Gram-Schmidt with one re-orthogonalization pass.
///
/// A row whose residual norm after projection is at most
/// `tol * max(1, ||row||)` is treated as dependent and discarded, so the
/// output length is the numerical rank. Empty input gives an empty output.
pub fn orthonormal_basis(rows: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(rows.len());
    for row in rows {
        let scale = row.norm().max(1.0);
        let mut v = row.clone();
        // Two projection passes keep the basis orthonormal to machine precision
        // even when rows are nearly dependent.
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > tol * scale {
            v /= norm;
            basis.push(v);
        }
    }
    basis
}

/// Orthonormal basis of the orthogonal complement of `span(rows)` in `R^n`.
///
/// `rows` must already be orthonormal (as produced by [`orthonormal_basis`]).
/// The result is deterministic: standard basis vectors are orthogonalized
/// against `rows` in index order.
pub fn complement_basis(rows: &[DVector<f64>], n: usize, tol: f64) -> Vec<DVector<f64>> {
    let target = n - rows.len();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(target);
    for i in 0..n {
        if basis.len() == target {
            break;
        }
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        for _ in 0..2 {
            for b in rows.iter().chain(basis.iter()) {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > tol.max(1e-12) {
            v /= norm;
            basis.push(v);
        }
    }
    debug_assert_eq!(basis.len(), target, "complement basis incomplete");
    basis
}

/// Symmetrize in place: `(M + M^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Spectral square root of a symmetric PSD matrix.
///
/// Eigenvalues in `[-tol, 0)` are clamped to zero; an eigenvalue below
/// `-tol` is an error. The result satisfies `||V*V - U||_max <= 10 * tol * n`.
pub fn psd_sqrt(u: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>, LinalgError> {
    let mut m = u.clone();
    symmetrize(&mut m);
    let eig = m.symmetric_eigen();
    let min_eig = eig.eigenvalues.min();
    if min_eig < -tol {
        return Err(LinalgError::NotPsd { min_eig, tol });
    }
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let mut v = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    symmetrize(&mut v);
    Ok(v)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut s = m.clone();
    symmetrize(&mut s);
    s.symmetric_eigen().eigenvalues.min()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut s = m.clone();
    symmetrize(&mut s);
    s.symmetric_eigen().eigenvalues.max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::{Signed, Zero};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    /// Exact rational Gaussian elimination with full pivoting; a pivot row
    /// counts toward the rank only if its residual Euclidean norm exceeds
    /// `tol` (compared exactly as rationals). Every f64 is dyadic, so the
    /// conversion below is exact.
    fn rational_rank(rows: &[Vec<f64>], tol: f64) -> usize {
        let to_rat = |x: f64| BigRational::from_float(x).expect("finite");
        let mut m: Vec<Vec<BigRational>> =
            rows.iter().map(|r| r.iter().map(|&x| to_rat(x)).collect()).collect();
        let tol2 = to_rat(tol) * to_rat(tol);
        let ncols = rows.first().map_or(0, Vec::len);
        let mut rank = 0usize;
        let mut used = vec![false; m.len()];
        for _ in 0..ncols.min(m.len()) {
            // Pick the unused row with the largest residual norm.
            let mut best: Option<(usize, BigRational)> = None;
            for (ri, row) in m.iter().enumerate() {
                if used[ri] {
                    continue;
                }
                let norm2: BigRational =
                    row.iter().map(|x| x.clone() * x.clone()).fold(BigRational::zero(), |a, b| a + b);
                if best.as_ref().map_or(true, |(_, b)| norm2 > *b) {
                    best = Some((ri, norm2));
                }
            }
            let (pi, norm2) = best.unwrap();
            if norm2 <= tol2 {
                break;
            }
            rank += 1;
            used[pi] = true;
            let pivot_row = m[pi].clone();
            for (ri, row) in m.iter_mut().enumerate() {
                if used[ri] {
                    continue;
                }
                let dot: BigRational = row
                    .iter()
                    .zip(&pivot_row)
                    .map(|(a, b)| a.clone() * b.clone())
                    .fold(BigRational::zero(), |a, b| a + b);
                if dot.is_zero() {
                    continue;
                }
                let coef = dot / norm2.clone();
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a -= coef.clone() * b.clone();
                }
            }
        }
        rank
    }

    #[test]
    fn basis_already_orthonormal() {
        let b = orthonormal_basis(&[dv(&[1.0, 0.0]), dv(&[0.0, 1.0])], 1e-9);
        assert_eq!(b.len(), 2);
        assert!((b[0].dot(&b[1])).abs() < 1e-14);
        assert!((b[0].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn basis_duplicate_direction() {
        let b = orthonormal_basis(&[dv(&[1.0, 1.0]), dv(&[2.0, 2.0])], 1e-9);
        assert_eq!(b.len(), 1);
        let expected = 1.0 / 2.0f64.sqrt();
        assert!((b[0][0].abs() - expected).abs() < 1e-14);
    }

    #[test]
    fn basis_near_dependent_matches_rational_elimination() {
        let eps = 1e-12;
        let tol = 1e-9;
        let rows = [dv(&[1.0, 0.0, 0.0]), dv(&[1.0, eps, 0.0])];
        let b = orthonormal_basis(&rows, tol);
        let oracle = rational_rank(&[vec![1.0, 0.0, 0.0], vec![1.0, eps, 0.0]], tol);
        assert_eq!(b.len(), oracle);
        assert_eq!(b.len(), 1);

        // Away from the threshold the numerical and exact ranks agree too.
        let rows = [dv(&[1.0, 0.0, 0.0]), dv(&[1.0, 1e-6, 0.0])];
        let b = orthonormal_basis(&rows, tol);
        let oracle = rational_rank(&[vec![1.0, 0.0, 0.0], vec![1.0, 1e-6, 0.0]], tol);
        assert_eq!(b.len(), oracle);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn basis_empty_input() {
        assert!(orthonormal_basis(&[], 1e-9).is_empty());
    }

    #[test]
    fn complement_fills_space() {
        let w = orthonormal_basis(&[dv(&[1.0, -1.0, 0.0])], 1e-9);
        let q = complement_basis(&w, 3, 1e-9);
        assert_eq!(q.len(), 2);
        for b in &q {
            assert!(w[0].dot(b).abs() < 1e-12);
            assert!((b.norm() - 1.0).abs() < 1e-12);
        }
        assert!(q[0].dot(&q[1]).abs() < 1e-12);
    }

    #[test]
    fn sqrt_identity() {
        let u = DMatrix::<f64>::identity(3, 3);
        let v = psd_sqrt(&u, 1e-9).unwrap();
        assert!((&v - &u).amax() < 1e-12);
    }

    #[test]
    fn sqrt_diagonal() {
        let u = DMatrix::from_diagonal(&dv(&[4.0, 9.0]));
        let v = psd_sqrt(&u, 1e-9).unwrap();
        assert!((v[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((v[(1, 1)] - 3.0).abs() < 1e-12);
        assert!(v[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn sqrt_wishart_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 8;
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let u = &g * g.transpose();
        let tol = 1e-9;
        let v = psd_sqrt(&u, tol).unwrap();
        let err = (&v * &v - &u).amax();
        assert!(err <= 10.0 * tol * n as f64, "reconstruction error {err:.3e}");
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let u = DMatrix::from_diagonal(&dv(&[1.0, -0.5]));
        assert!(matches!(psd_sqrt(&u, 1e-9), Err(LinalgError::NotPsd { .. })));
    }
}
