//! Dense symmetric linear-algebra helpers shared by the estimators and solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Above this size the operator norm falls back to power iteration.
pub const DIRECT_NORM_LIMIT: usize = 2000;
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

/// Largest entrywise asymmetry `max |A_ij - A_ji|`.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigenpairs of a symmetric matrix, eigenvalues non-increasing.
///
/// Ties keep the solver's original column order, so the output is
/// deterministic for a given input.
pub fn sym_eigen_desc(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues only, non-increasing.
pub fn sym_eigenvalues_desc(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Spectral norm of a symmetric matrix: the largest absolute eigenvalue.
pub fn sym_operator_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    if a.nrows() <= DIRECT_NORM_LIMIT {
        a.clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    } else {
        power_iteration_norm(a, POWER_TOL, POWER_MAX_ITER)
    }
}

/// Power iteration on `A` for the dominant absolute eigenvalue of a
/// symmetric matrix.
pub fn power_iteration_norm(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    // deterministic, non-degenerate start vector
    let mut v = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 104_729) as f64 / 104_729.0);
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let w = a * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w / norm;
        if (next - estimate).abs() <= tol * next.max(1e-300) {
            return next;
        }
        estimate = next;
    }
    estimate
}

pub fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite)
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Kronecker product of two vectors, first factor outermost.
pub fn kron_vec(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() * b.len());
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Solve `L Lᵀ x = b` given the lower factor.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let y = l
        .solve_lower_triangular(b)
        .expect("Cholesky factor has a nonzero diagonal");
    l.transpose()
        .solve_upper_triangular(&y)
        .expect("Cholesky factor has a nonzero diagonal")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_desc_sorted_and_orthonormal() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let (vals, vecs) = sym_eigen_desc(&a);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        let gram = vecs.transpose() * &vecs;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-12);
        let recon = &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals)) * vecs.transpose();
        assert!((recon - a).amax() < 1e-12);
    }

    #[test]
    fn power_iteration_matches_direct() {
        let n = 40;
        let a = DMatrix::from_fn(n, n, |i, j| 1.0 / (1.0 + (i as f64 - j as f64).abs()));
        let direct = sym_operator_norm(&a);
        let power = power_iteration_norm(&a, 1e-12, 10_000);
        assert!((direct - power).abs() < 1e-8 * direct);
    }

    #[test]
    fn operator_norm_of_negative_definite() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, 1.0]));
        assert_eq!(sym_operator_norm(&a), 3.0);
    }

    #[test]
    fn kron_vec_matches_matrix_kron() {
        let a = DVector::from_vec(vec![1.0, 2.0]);
        let b = DVector::from_vec(vec![3.0, 4.0, 5.0]);
        let v = kron_vec(&a, &b);
        let m = kron(&DMatrix::from_column_slice(2, 1, a.as_slice()), &DMatrix::from_column_slice(3, 1, b.as_slice()));
        for i in 0..6 {
            assert_eq!(v[i], m[(i, 0)]);
        }
    }
}
