//! Multivariate Gaussian densities and dense linear maps.
//!
//! Every object in the linear pipeline (initial, observed, updated and
//! posterior densities, and the noise model) is a [`GaussianDensity`]. The
//! Cholesky factor of the covariance is computed once at construction and
//! reused for density evaluation, sampling and precision summaries.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PopInferError, Result};
use crate::linalg;

#[derive(Debug, Clone)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

/// Determinant and trace of the precision matrix Γ⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionSummaries {
    pub det_of_inverse: f64,
    pub trace_of_inverse: f64,
}

impl GaussianDensity {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
            return Err(PopInferError::dims(
                "covariance vs mean",
                mean.len(),
                covariance.nrows().max(covariance.ncols()),
            ));
        }
        linalg::check_symmetric(&covariance)?;
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or(PopInferError::NotPositiveDefinite)?;
        Ok(Self {
            mean,
            covariance,
            chol,
        })
    }

    pub fn from_slices(mean: &[f64], covariance_rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            DVector::from_column_slice(mean),
            linalg::matrix_from_rows(covariance_rows)?,
        )
    }

    /// `N(mean, variance · I)`.
    pub fn isotropic(mean: &[f64], variance: f64) -> Result<Self> {
        let n = mean.len();
        Self::new(
            DVector::from_column_slice(mean),
            DMatrix::identity(n, n) * variance,
        )
    }

    /// Builds a density from a covariance produced by internal arithmetic,
    /// symmetrising away round-off first.
    pub(crate) fn from_computed(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        Self::new(mean, linalg::symmetrize(&covariance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn precision(&self) -> DMatrix<f64> {
        linalg::symmetrize(&self.chol.inverse())
    }

    pub fn log_det_covariance(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Squared Mahalanobis distance `(x - m)ᵀ Γ⁻¹ (x - m)`.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(PopInferError::dims("gaussian argument", self.dim(), x.len()));
        }
        let diff = DVector::from_iterator(self.dim(), x.iter().zip(self.mean.iter()).map(|(a, b)| a - b));
        let solved = self.chol.solve(&diff);
        Ok(diff.dot(&solved))
    }

    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        let quad = self.mahalanobis_sq(x)?;
        let k = self.dim() as f64;
        Ok(-0.5 * (k * (2.0 * PI).ln() + self.log_det_covariance() + quad))
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        self.log_pdf(x).map(f64::exp)
    }

    /// `n` i.i.d. draws, one per row. `n = 0` yields an empty `0 × dim` matrix.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> DMatrix<f64> {
        let d = self.dim();
        let l = self.chol.l();
        let mut out = DMatrix::zeros(n, d);
        let mut z = DVector::zeros(d);
        for i in 0..n {
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let x = &self.mean + &l * &z;
            out.set_row(i, &x.transpose());
        }
        out
    }

    /// Push-forward through a linear map: `N(Aμ, AΓAᵀ)`.
    pub fn pushforward(&self, map: &LinearMap) -> Result<GaussianDensity> {
        if map.cols() != self.dim() {
            return Err(PopInferError::dims("pushforward map columns", self.dim(), map.cols()));
        }
        let a = map.matrix();
        GaussianDensity::from_computed(a * &self.mean, a * &self.covariance * a.transpose())
    }

    /// `KL(self ‖ other)` in nats.
    pub fn kl_divergence(&self, other: &GaussianDensity) -> Result<f64> {
        kl_gaussian(self, other)
    }

    pub fn precision_summaries(&self) -> PrecisionSummaries {
        let precision = self.precision();
        PrecisionSummaries {
            det_of_inverse: (-self.log_det_covariance()).exp(),
            trace_of_inverse: precision.trace(),
        }
    }
}

/// Closed-form KL divergence between two Gaussians, in nats.
pub fn kl_gaussian(p: &GaussianDensity, q: &GaussianDensity) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(PopInferError::dims("kl_gaussian", p.dim(), q.dim()));
    }
    let k = p.dim() as f64;
    let mean_term = q.mahalanobis_sq(p.mean.as_slice())?;
    let trace_term = q.chol.solve(&p.covariance).trace();
    let log_det_ratio = q.log_det_covariance() - p.log_det_covariance();
    // Round-off can push an exact zero slightly negative.
    Ok((0.5 * (log_det_ratio - k + mean_term + trace_term)).max(0.0))
}

/// Dense matrix from parameter space to data space with full row rank.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    matrix: DMatrix<f64>,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let rows = matrix.nrows();
        if rows == 0 || matrix.ncols() == 0 {
            return Err(PopInferError::InvalidArgument("linear map must be non-empty".into()));
        }
        let sv = matrix.clone().singular_values();
        let smax = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
        let tol = smax * rows.max(matrix.ncols()) as f64 * f64::EPSILON;
        let rank = sv.iter().filter(|&&s| s > tol).count();
        if rank < rows {
            return Err(PopInferError::RankDeficient { rank, rows });
        }
        Ok(Self { matrix })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(linalg::matrix_from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Output (data) dimension.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Input (parameter) dimension.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols() {
            return Err(PopInferError::dims("linear map input", self.cols(), x.len()));
        }
        let v = &self.matrix * DVector::from_column_slice(x);
        Ok(v.iter().copied().collect())
    }
}
