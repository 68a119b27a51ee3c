//! Small dense linear-algebra helpers shared by the Gaussian pipelines.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{PopInferError, Result};

/// Relative tolerance for the symmetry check on covariance inputs.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(PopInferError::dims("square matrix", m.nrows(), m.ncols()));
    }
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOLERANCE * max_abs(m) {
        return Err(PopInferError::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Average a matrix with its transpose, removing round-off asymmetry.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Apply `f` to the eigenvalues of a symmetric matrix: `V f(D) Vᵀ`.
pub fn sym_function(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let mapped = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&v| f(v)));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&mapped) * v.transpose()))
}

/// Symmetric square root of an SPD matrix.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_function(m, |v| v.max(0.0).sqrt())
}

/// Symmetric inverse square root of an SPD matrix.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_function(m, |v| 1.0 / v.sqrt())
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}

/// Inverse of an SPD matrix via its Cholesky factor.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or(PopInferError::NotPositiveDefinite)?;
    Ok(symmetrize(&chol.inverse()))
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(PopInferError::dims("matrix row length", ncols, bad.len()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Sample mean of the rows of `samples`.
pub fn row_mean(samples: &DMatrix<f64>) -> DVector<f64> {
    let n = samples.nrows().max(1) as f64;
    DVector::from_iterator(
        samples.ncols(),
        (0..samples.ncols()).map(|j| samples.column(j).sum() / n),
    )
}

/// Unbiased sample covariance of the rows of `samples`.
pub fn row_covariance(samples: &DMatrix<f64>) -> DMatrix<f64> {
    let n = samples.nrows();
    let mean = row_mean(samples);
    let d = samples.ncols();
    let mut cov = DMatrix::zeros(d, d);
    for row in samples.row_iter() {
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for a in 0..d {
        for b in a..d {
            cov[(a, b)] /= denom;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    cov
}
