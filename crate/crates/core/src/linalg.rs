//! Small dense symmetric linear algebra on `nalgebra` matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative off-diagonal tolerance at which the Jacobi sweep stops.
pub const JACOBI_TOL: f64 = 1e-12;

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns. Each eigenvector is signed so that its first
/// component of magnitude above 1e-12 is positive, which makes the output
/// deterministic.
pub fn sym_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eigen needs a square matrix");
    let mut m = a.clone();
    // Symmetrize from the upper triangle so round-off in the input cannot bias the sweep.
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].powi(2)).sum::<f64>().sqrt();
        if off <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut c = v.column(i).into_owned();
        if let Some(first) = c.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                c.neg_mut();
            }
        }
        vectors.set_column(col, &c);
    }
    (values, vectors)
}

/// `vᵀ A v`.
pub fn quad_form(a: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(a * v))
}

pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square() && (0..a.nrows()).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= tol * (1.0 + a[(i, j)].abs())))
}

pub fn is_spd(a: &DMatrix<f64>) -> bool {
    is_symmetric(a, 1e-10) && a.clone().cholesky().is_some()
}

/// `f(A)` for symmetric `A` through its eigendecomposition.
pub fn sym_fn(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(a);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(vals.len(), vals.into_iter().map(f)));
    &vecs * d * vecs.transpose()
}

pub fn spd_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !is_spd(a) {
        return Err(Error::NotSpd);
    }
    Ok(sym_fn(a, f64::sqrt))
}

pub fn spd_inv_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !is_spd(a) {
        return Err(Error::NotSpd);
    }
    Ok(sym_fn(a, |x| 1.0 / x.sqrt()))
}

/// Orthogonal matrix whose first column is the unit vector `eta`.
///
/// Built from a single Householder reflection, so the result is a
/// deterministic function of `eta`.
pub fn householder_completion(eta: &DVector<f64>) -> DMatrix<f64> {
    let n = eta.len();
    let mut e1 = DVector::zeros(n);
    e1[0] = 1.0;
    // Reflect e1 onto eta: H = I − 2wwᵀ with w ∝ e1 − eta, or ∝ e1 + eta followed by a sign flip.
    let (w, flip) = if eta[0] <= 0.0 { (&e1 - eta, false) } else { (&e1 + eta, true) };
    let nw = w.norm();
    let mut q = DMatrix::identity(n, n);
    if nw > 1e-300 {
        let w = w / nw;
        q -= 2.0 * &w * w.transpose();
    }
    if flip {
        // H e1 = −eta here; negate the first column only.
        let c = -q.column(0).into_owned();
        q.set_column(0, &c);
    }
    q
}

/// Determinant via LU.
pub fn det(a: &DMatrix<f64>) -> f64 {
    a.clone().lu().determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_saddle_hessian() {
        let h = DMatrix::from_row_slice(2, 2, &[-4.0, 0.0, 0.0, 4.0]);
        let (vals, vecs) = sym_eigen(&h);
        assert_eq!(vals, vec![-4.0, 4.0]);
        assert_eq!(vecs, DMatrix::identity(2, 2));
    }

    #[test]
    fn eigen_reconstructs_dense_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, -2.0, 1.0, 2.0, 0.5, -2.0, 0.5, 3.0]);
        let (vals, vecs) = sym_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let rec = &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals)) * vecs.transpose();
        assert!((rec - &a).norm() <= 1e-12 * a.norm());
        assert!((vecs.transpose() * &vecs - DMatrix::identity(3, 3)).norm() < 1e-13);
    }

    #[test]
    fn householder_first_column() {
        for eta in [vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0], vec![0.6, -0.8, 0.0], vec![-0.48, 0.6, 0.64]] {
            let eta = DVector::from_vec(eta);
            let q = householder_completion(&eta);
            assert!((q.column(0) - &eta).norm() < 1e-15);
            assert!((q.transpose() * &q - DMatrix::identity(3, 3)).norm() < 1e-14);
        }
    }

    #[test]
    fn spd_square_root() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = spd_sqrt(&a).unwrap();
        assert!((&r * &r - &a).norm() < 1e-14);
        let ir = spd_inv_sqrt(&a).unwrap();
        assert!((&ir * &a * &ir - DMatrix::identity(2, 2)).norm() < 1e-14);
        assert_eq!(spd_sqrt(&DMatrix::from_row_slice(1, 1, &[-1.0])), Err(Error::NotSpd));
    }
}
