//! Closed-form data-consistent inversion for linear maps with Gaussian
//! initial and observed densities.
//!
//! With `Q = Γ_in^{1/2} Aᵀ Γ_obs^{-1/2}` and reduced SVD `Q = U Σ Vᵀ`, the
//! updated precision is `Γ_in⁻¹ + Γ_in^{-1/2} U (Σ² − I) Uᵀ Γ_in^{-1/2}`. A
//! singular value below one means the observed density is wider than the
//! predicted one in some direction and no consistent update exists.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{PopInferError, Result};
use crate::gaussian::{GaussianDensity, LinearMap};
use crate::linalg;

/// Slack allowed below unity before a singular value counts as a violation.
pub const DEFAULT_PREDICTABILITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictabilitySpectrum {
    /// Nonincreasing singular values of `Q`, one per data dimension.
    pub singular_values: Vec<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Predictability {
    Satisfied,
    Violated { min_value: f64 },
}

impl PredictabilitySpectrum {
    pub fn min_value(&self) -> f64 {
        self.singular_values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn check(&self) -> Predictability {
        check_predictability(self)
    }
}

pub fn check_predictability(spectrum: &PredictabilitySpectrum) -> Predictability {
    let min_value = spectrum.min_value();
    if min_value >= 1.0 - spectrum.tolerance {
        Predictability::Satisfied
    } else {
        Predictability::Violated { min_value }
    }
}

/// The decomposition `Γ_up⁻¹ = Γ_in⁻¹ + Y Yᵀ`.
#[derive(Debug, Clone)]
pub struct PrecisionSplit {
    pub init_precision: DMatrix<f64>,
    /// `n × m_p` factor `Y = Γ_in^{-1/2} U G^{1/2}`.
    pub low_rank_factor: DMatrix<f64>,
}

impl PrecisionSplit {
    pub fn updated_precision(&self) -> DMatrix<f64> {
        &self.init_precision + &self.low_rank_factor * self.low_rank_factor.transpose()
    }
}

fn check_dims(init: &GaussianDensity, pop_map: &LinearMap, observed: &GaussianDensity) -> Result<()> {
    if pop_map.cols() != init.dim() {
        return Err(PopInferError::dims("population map columns", init.dim(), pop_map.cols()));
    }
    if pop_map.rows() != observed.dim() {
        return Err(PopInferError::dims("observed density dimension", pop_map.rows(), observed.dim()));
    }
    Ok(())
}

struct QDecomposition {
    singular_values: Vec<f64>,
    /// Left singular vectors, columns ordered like `singular_values`.
    u: DMatrix<f64>,
}

fn decompose_q(init: &GaussianDensity, pop_map: &LinearMap, observed: &GaussianDensity) -> Result<QDecomposition> {
    check_dims(init, pop_map, observed)?;
    let q = linalg::sym_sqrt(init.covariance())
        * pop_map.matrix().transpose()
        * linalg::sym_inv_sqrt(observed.covariance());
    let svd = q.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    Ok(QDecomposition { singular_values, u })
}

pub fn predictability_spectrum(
    init: &GaussianDensity,
    pop_map: &LinearMap,
    observed: &GaussianDensity,
) -> Result<PredictabilitySpectrum> {
    predictability_spectrum_with_tolerance(init, pop_map, observed, DEFAULT_PREDICTABILITY_TOLERANCE)
}

pub fn predictability_spectrum_with_tolerance(
    init: &GaussianDensity,
    pop_map: &LinearMap,
    observed: &GaussianDensity,
    tolerance: f64,
) -> Result<PredictabilitySpectrum> {
    let q = decompose_q(init, pop_map, observed)?;
    Ok(PredictabilitySpectrum {
        singular_values: q.singular_values,
        tolerance,
    })
}

pub fn updated_density(
    init: &GaussianDensity,
    pop_map: &LinearMap,
    observed: &GaussianDensity,
) -> Result<GaussianDensity> {
    updated_density_with_tolerance(init, pop_map, observed, DEFAULT_PREDICTABILITY_TOLERANCE)
}

/// Gaussian updated density from the three-term precision formula
/// `AᵀΓ_obs⁻¹A + Γ_in⁻¹ − Aᵀ(AΓ_inAᵀ)⁻¹A`.
pub fn updated_density_with_tolerance(
    init: &GaussianDensity,
    pop_map: &LinearMap,
    observed: &GaussianDensity,
    tolerance: f64,
) -> Result<GaussianDensity> {
    let spectrum = predictability_spectrum_with_tolerance(init, pop_map, observed, tolerance)?;
    if let Predictability::Violated { min_value } = spectrum.check() {
        return Err(PopInferError::PredictabilityViolated { min_value });
    }

    let a = pop_map.matrix();
    let obs_precision = observed.precision();
    let predicted_precision = linalg::spd_inverse(&(a * init.covariance() * a.transpose()))?;
    let precision = a.transpose() * &obs_precision * a + init.precision()
        - a.transpose() * predicted_precision * a;
    let covariance = linalg::spd_inverse(&linalg::symmetrize(&precision))?;

    let residual = observed.mean() - a * init.mean();
    let mean = init.mean() + &covariance * a.transpose() * obs_precision * residual;
    GaussianDensity::from_computed(mean, covariance)
}

pub fn precision_split(
    init: &GaussianDensity,
    pop_map: &LinearMap,
    observed: &GaussianDensity,
) -> Result<PrecisionSplit> {
    precision_split_with_tolerance(init, pop_map, observed, DEFAULT_PREDICTABILITY_TOLERANCE)
}

pub fn precision_split_with_tolerance(
    init: &GaussianDensity,
    pop_map: &LinearMap,
    observed: &GaussianDensity,
    tolerance: f64,
) -> Result<PrecisionSplit> {
    let q = decompose_q(init, pop_map, observed)?;
    let spectrum = PredictabilitySpectrum {
        singular_values: q.singular_values.clone(),
        tolerance,
    };
    if let Predictability::Violated { min_value } = spectrum.check() {
        return Err(PopInferError::PredictabilityViolated { min_value });
    }
    // Values inside the tolerance band below one are clamped to G = 0.
    let g_sqrt: Vec<f64> = q
        .singular_values
        .iter()
        .map(|s| (s * s - 1.0).max(0.0).sqrt())
        .collect();
    let scaled_u = DMatrix::from_fn(q.u.nrows(), q.u.ncols(), |r, c| q.u[(r, c)] * g_sqrt[c]);
    Ok(PrecisionSplit {
        init_precision: init.precision(),
        low_rank_factor: linalg::sym_inv_sqrt(init.covariance()) * scaled_u,
    })
}
