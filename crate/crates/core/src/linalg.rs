//! Thin helpers over faer for the vector layout used throughout the crate
//! (plain `&[f64]` slices) and for small dense kernels.

use faer::sparse::{SparseRowMat, Triplet};
use faer::{ColRef, Mat, MatRef, Side};

use crate::{Error, Result};

pub type SparseMatrix = SparseRowMat<usize, f64>;

/// Builds a CSR matrix, summing duplicate entries.
pub fn sparse_from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> SparseMatrix {
    let triplets: Vec<Triplet<usize, usize, f64>> = entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
    SparseRowMat::try_new_from_triplets(nrows, ncols, &triplets).expect("triplet indices out of range")
}

/// `y = A x`.
pub fn spmv(a: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len(), "spmv: dimension mismatch");
    let (ptr, idx, val) = (a.symbolic().row_ptr(), a.symbolic().col_idx(), a.val());
    (0..a.nrows()).map(|i| (ptr[i]..ptr[i + 1]).map(|p| val[p] * x[idx[p]]).sum()).collect()
}

/// `y = Aᵀ x`.
pub fn spmv_transpose(a: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.nrows(), x.len(), "spmv_transpose: dimension mismatch");
    let (ptr, idx, val) = (a.symbolic().row_ptr(), a.symbolic().col_idx(), a.val());
    let mut y = vec![0.0; a.ncols()];
    for i in 0..a.nrows() {
        for p in ptr[i]..ptr[i + 1] {
            y[idx[p]] += val[p] * x[i];
        }
    }
    y
}

pub fn to_dense(a: &SparseMatrix) -> Mat<f64> {
    a.as_ref().to_dense()
}

/// Entry `(i, j)`, zero if not stored.
pub fn sparse_entry(a: &SparseMatrix, i: usize, j: usize) -> f64 {
    let (ptr, idx, val) = (a.symbolic().row_ptr(), a.symbolic().col_idx(), a.val());
    (ptr[i]..ptr[i + 1]).filter(|&p| idx[p] == j).map(|p| val[p]).sum()
}

/// Dense principal submatrix at `dofs`.
pub fn sparse_submatrix(a: &SparseMatrix, dofs: &[usize]) -> Mat<f64> {
    Mat::from_fn(dofs.len(), dofs.len(), |r, c| sparse_entry(a, dofs[r], dofs[c]))
}

pub fn gemv(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let y = a * ColRef::from_slice(x);
    y.iter().copied().collect()
}

pub fn gemv_transpose(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    gemv(a.transpose(), x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Column `j` of a dense matrix as a vector.
pub fn column(m: MatRef<'_, f64>, j: usize) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

/// `A - B` for dense matrices of equal shape.
pub fn sub(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

/// Largest absolute entry.
pub fn max_abs(a: MatRef<'_, f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// Solves `A X = B` for symmetric positive definite `A` by Cholesky.
pub fn spd_solve(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
    use faer::linalg::solvers::Solve;
    let llt = a.llt(Side::Lower).map_err(|_| Error::Singular("Cholesky factorization failed".into()))?;
    Ok(llt.solve(b))
}

/// Eigenvalues (ascending) of a symmetric matrix.
pub fn symmetric_eigenvalues(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = sparse_from_triplets(2, 3, &[(0, 1, 1.0), (1, 2, 2.0), (0, 1, 0.5), (1, 0, -1.0)]);
        let d = to_dense(&a);
        assert_eq!(d[(0, 1)], 1.5);
        assert_eq!(d[(1, 2)], 2.0);
        assert_eq!(d[(1, 0)], -1.0);
        assert_eq!(sparse_entry(&a, 0, 1), 1.5);
        assert_eq!(sparse_entry(&a, 0, 0), 0.0);
        assert_eq!(spmv(&a, &[1.0, 2.0, 3.0]), vec![3.0, 5.0]);
        assert_eq!(spmv_transpose(&a, &[1.0, 2.0]), vec![-2.0, 1.5, 4.0]);
    }

    #[test]
    fn dense_kernels() {
        let a = Mat::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 1.0 });
        assert_eq!(gemv(a.as_ref(), &[1.0, -1.0]), vec![1.0, -1.0]);
        let x = spd_solve(a.as_ref(), Mat::from_fn(2, 1, |i, _| [3.0, 3.0][i]).as_ref()).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14 && (x[(1, 0)] - 1.0).abs() < 1e-14);
        let ev = symmetric_eigenvalues(a.as_ref()).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }
}
