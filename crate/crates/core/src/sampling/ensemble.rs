//! The initial-density ensemble and the per-sample quantities the sampling
//! pipeline builds on it: ratio weights, likelihoods, the mean-ratio diagnostic, the
//! evidence, and the Monte Carlo KL estimate.
//!
//! Weights and likelihoods are held as logarithms. With narrow noise models
//! the raw likelihoods over- or underflow long before their ratios do.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::density::LogDensity;
use crate::error::{PopInferError, Result};
use crate::forward_models::ForwardModel;
use crate::gaussian::GaussianDensity;
use crate::sampling::kde::KernelDensityEstimate;

/// Predicted-density values below this are treated as a predictability failure.
pub const PREDICTED_DENSITY_FLOOR: f64 = 1e-300;
/// Absolute slack on the mean ratio before the diagnostic relies on its standard error.
pub const DIAGNOSTIC_ABS_TOLERANCE: f64 = 0.05;
pub const DIAGNOSTIC_STD_ERRORS: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct SampleEnsemble {
    params: DMatrix<f64>,
    pop_outputs: DMatrix<f64>,
    ind_outputs: DMatrix<f64>,
    log_weights: Vec<f64>,
    log_likelihoods: Vec<f64>,
}

impl SampleEnsemble {
    /// Evaluates both models on every parameter row. Weights and likelihoods
    /// start at one.
    pub fn evaluate(params: DMatrix<f64>, pop_model: &ForwardModel, ind_model: &ForwardModel) -> Result<Self> {
        let pop_outputs = pop_model.evaluate_rows(&params)?;
        let ind_outputs = ind_model.evaluate_rows(&params)?;
        let n = params.nrows();
        Ok(Self {
            params,
            pop_outputs,
            ind_outputs,
            log_weights: vec![0.0; n],
            log_likelihoods: vec![0.0; n],
        })
    }

    pub fn from_parts(
        params: DMatrix<f64>,
        pop_outputs: DMatrix<f64>,
        ind_outputs: DMatrix<f64>,
        weights: &[f64],
        likelihoods: &[f64],
    ) -> Result<Self> {
        let n = params.nrows();
        for (what, len) in [
            ("population outputs", pop_outputs.nrows()),
            ("individual outputs", ind_outputs.nrows()),
            ("weights", weights.len()),
            ("likelihoods", likelihoods.len()),
        ] {
            if len != n {
                return Err(PopInferError::dims(what, n, len));
            }
        }
        Ok(Self {
            params,
            pop_outputs,
            ind_outputs,
            log_weights: to_log(weights)?,
            log_likelihoods: to_log(likelihoods)?,
        })
    }

    pub fn len(&self) -> usize {
        self.params.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn params(&self) -> &DMatrix<f64> {
        &self.params
    }

    pub fn pop_outputs(&self) -> &DMatrix<f64> {
        &self.pop_outputs
    }

    pub fn ind_outputs(&self) -> &DMatrix<f64> {
        &self.ind_outputs
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_likelihoods(&self) -> &[f64] {
        &self.log_likelihoods
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|v| v.exp()).collect()
    }

    pub fn likelihoods(&self) -> Vec<f64> {
        self.log_likelihoods.iter().map(|v| v.exp()).collect()
    }

    pub fn set_log_weights(&mut self, log_weights: Vec<f64>) -> Result<()> {
        check_log_values(&log_weights, self.len(), "weights")?;
        self.log_weights = log_weights;
        Ok(())
    }

    pub fn set_log_likelihoods(&mut self, log_likelihoods: Vec<f64>) -> Result<()> {
        check_log_values(&log_likelihoods, self.len(), "likelihoods")?;
        self.log_likelihoods = log_likelihoods;
        Ok(())
    }

    /// Copy with all weights reset to one (the standard-posterior setting).
    pub fn with_unit_weights(&self) -> Self {
        let mut e = self.clone();
        e.log_weights = vec![0.0; self.len()];
        e
    }

    /// Copy with all likelihoods reset to one (samples the updated density).
    pub fn with_unit_likelihoods(&self) -> Self {
        let mut e = self.clone();
        e.log_likelihoods = vec![0.0; self.len()];
        e
    }

    /// Per-sample `ln(w_j L_j)`.
    pub fn log_products(&self) -> Vec<f64> {
        self.log_weights
            .iter()
            .zip(&self.log_likelihoods)
            .map(|(w, l)| w + l)
            .collect()
    }
}

fn to_log(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&v| {
            if v.is_finite() && v >= 0.0 {
                Ok(v.ln())
            } else {
                Err(PopInferError::InvalidArgument(format!(
                    "weights and likelihoods must be finite and non-negative, got {v}"
                )))
            }
        })
        .collect()
}

fn check_log_values(values: &[f64], n: usize, what: &'static str) -> Result<()> {
    if values.len() != n {
        return Err(PopInferError::dims(what, n, values.len()));
    }
    if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(PopInferError::InvalidArgument(format!("{what} must be finite")));
    }
    Ok(())
}

/// `ln r(λ_j) = ln π_obs(f_p(λ_j)) − ln π̂_pred(f_p(λ_j))`.
pub fn log_ratio_weights(
    pop_outputs: &DMatrix<f64>,
    observed: &dyn LogDensity,
    kde: &KernelDensityEstimate,
) -> Result<Vec<f64>> {
    if observed.dim() != pop_outputs.ncols() {
        return Err(PopInferError::dims("observed density", pop_outputs.ncols(), observed.dim()));
    }
    if kde.dim() != pop_outputs.ncols() {
        return Err(PopInferError::dims("predicted density", pop_outputs.ncols(), kde.dim()));
    }
    let floor = PREDICTED_DENSITY_FLOOR.ln();
    (0..pop_outputs.nrows())
        .into_par_iter()
        .map(|j| {
            let q: Vec<f64> = pop_outputs.row(j).iter().copied().collect();
            let ln_pred = kde.ln_pdf_at(&q);
            if !(ln_pred >= floor) {
                return Err(PopInferError::NonFiniteWeight { index: j });
            }
            let lw = observed.ln_pdf(&q) - ln_pred;
            if lw.is_nan() || lw == f64::INFINITY || lw.exp() == f64::INFINITY {
                return Err(PopInferError::NonFiniteWeight { index: j });
            }
            Ok(lw)
        })
        .collect()
}

/// `r(λ_j) = π_obs(f_p(λ_j)) / π̂_pred(f_p(λ_j))`.
pub fn ratio_weights(
    pop_outputs: &DMatrix<f64>,
    observed: &dyn LogDensity,
    kde: &KernelDensityEstimate,
) -> Result<Vec<f64>> {
    Ok(log_ratio_weights(pop_outputs, observed, kde)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanRatioDiagnostic {
    pub mean: f64,
    pub std_error: f64,
    pub pass: bool,
}

/// Sample mean of the ratio weights, which should be one when the
/// predictability assumption holds.
pub fn diagnostic_mean_ratio(weights: &[f64]) -> MeanRatioDiagnostic {
    let n = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / n;
    let var = if weights.len() > 1 {
        weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        f64::NAN
    };
    let std_error = (var / n).sqrt();
    let slack = DIAGNOSTIC_ABS_TOLERANCE.max(DIAGNOSTIC_STD_ERRORS * std_error);
    MeanRatioDiagnostic {
        mean,
        std_error,
        pass: (mean - 1.0).abs() <= slack,
    }
}

/// `ln π_like(y | λ_j)` for Gaussian noise around `f_i(λ_j)`.
pub fn gaussian_log_likelihoods(
    ind_outputs: &DMatrix<f64>,
    data: &[f64],
    noise_covariance: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let m = ind_outputs.ncols();
    if data.len() != m {
        return Err(PopInferError::dims("data vector", m, data.len()));
    }
    if noise_covariance.nrows() != m {
        return Err(PopInferError::dims("noise covariance", m, noise_covariance.nrows()));
    }
    let noise = GaussianDensity::new(DVector::from_column_slice(data), noise_covariance.clone())?;
    // Symmetric in (y, f_i): N(y; f, Γ) = N(f; y, Γ).
    Ok((0..ind_outputs.nrows())
        .into_par_iter()
        .map(|j| {
            let f: Vec<f64> = ind_outputs.row(j).iter().copied().collect();
            noise.log_pdf(&f).unwrap_or(f64::NEG_INFINITY)
        })
        .collect())
}

pub fn gaussian_likelihoods(
    ind_outputs: &DMatrix<f64>,
    data: &[f64],
    noise_covariance: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    Ok(gaussian_log_likelihoods(ind_outputs, data, noise_covariance)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// Monte Carlo evidence estimate, held in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvidenceEstimate {
    pub ln_value: f64,
    /// Standard error of the estimate divided by the estimate.
    pub relative_std_error: f64,
}

impl EvidenceEstimate {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }
}

/// `ln((1/N) Σ exp(a_j))` and the relative standard error of that mean.
fn log_mean_exp(log_terms: &[f64]) -> (f64, f64) {
    let n = log_terms.len() as f64;
    let max = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, f64::NAN);
    }
    let scaled: Vec<f64> = log_terms.iter().map(|a| (a - max).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / n;
    let var = scaled.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (max + mean.ln(), (var / n).sqrt() / mean)
}

/// `C̃ ≈ (1/N) Σ w_j L_j` from log weights and log likelihoods.
pub fn estimate_log_evidence(log_weights: &[f64], log_likelihoods: &[f64]) -> Result<EvidenceEstimate> {
    if log_weights.len() != log_likelihoods.len() {
        return Err(PopInferError::dims("likelihoods", log_weights.len(), log_likelihoods.len()));
    }
    if log_weights.is_empty() {
        return Err(PopInferError::ZeroEvidence);
    }
    let terms: Vec<f64> = log_weights.iter().zip(log_likelihoods).map(|(w, l)| w + l).collect();
    let (ln_value, relative_std_error) = log_mean_exp(&terms);
    if !ln_value.is_finite() {
        return Err(PopInferError::ZeroEvidence);
    }
    Ok(EvidenceEstimate {
        ln_value,
        relative_std_error,
    })
}

/// `C̃ ≈ (1/N) Σ w_j L_j`. With unit weights this is the standard evidence.
pub fn estimate_pop_evidence(weights: &[f64], likelihoods: &[f64]) -> Result<f64> {
    let est = estimate_log_evidence(&to_log(weights)?, &to_log(likelihoods)?)?;
    let value = est.value();
    if value > 0.0 {
        Ok(value)
    } else {
        Err(PopInferError::ZeroEvidence)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// `KL(π̃_post ‖ π_init) ≈ (1/N) Σ α_j ln α_j` with `α_j = w_j L_j / C̃`,
/// all in log space. Terms with `w_j L_j = 0` contribute nothing.
pub fn mc_kl_estimate_log(log_weights: &[f64], log_likelihoods: &[f64], ln_evidence: f64) -> Result<KlEstimate> {
    if log_weights.len() != log_likelihoods.len() {
        return Err(PopInferError::dims("likelihoods", log_weights.len(), log_likelihoods.len()));
    }
    if !ln_evidence.is_finite() {
        return Err(PopInferError::ZeroEvidence);
    }
    let terms: Vec<f64> = log_weights
        .iter()
        .zip(log_likelihoods)
        .map(|(w, l)| {
            let ln_alpha = w + l - ln_evidence;
            if ln_alpha == f64::NEG_INFINITY {
                0.0
            } else {
                ln_alpha.exp() * ln_alpha
            }
        })
        .collect();
    let n = terms.len() as f64;
    let value = terms.iter().sum::<f64>() / n;
    let var = terms.iter().map(|t| (t - value).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(KlEstimate {
        value,
        std_error: (var / n).sqrt(),
    })
}

pub fn mc_kl_estimate(weights: &[f64], likelihoods: &[f64], evidence: f64) -> Result<KlEstimate> {
    if !(evidence > 0.0) {
        return Err(PopInferError::ZeroEvidence);
    }
    mc_kl_estimate_log(&to_log(weights)?, &to_log(likelihoods)?, evidence.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn diagnostic_on_unit_weights() {
        let d = diagnostic_mean_ratio(&[1.0; 10]);
        assert_eq!(d.mean, 1.0);
        assert_eq!(d.std_error, 0.0);
        assert!(d.pass);
        assert!(!diagnostic_mean_ratio(&[0.5; 10]).pass);
    }

    #[test]
    fn likelihood_values() {
        let outputs = DMatrix::from_row_slice(3, 1, &[0.39, 0.39 + 0.1_f64.sqrt(), -1.0]);
        let noise = DMatrix::from_element(1, 1, 0.1);
        let l = gaussian_likelihoods(&outputs, &[0.39], &noise).unwrap();
        let mode = 1.0 / (2.0 * PI * 0.1).sqrt();
        assert_relative_eq!(l[0], mode, max_relative = 1e-14);
        assert_relative_eq!(l[1], mode * (-0.5_f64).exp(), max_relative = 1e-12);
        for (j, lj) in l.iter().enumerate() {
            let single = DMatrix::from_row_slice(1, 1, &[outputs[(j, 0)]]);
            assert_eq!(gaussian_likelihoods(&single, &[0.39], &noise).unwrap()[0], *lj);
        }
        assert!(gaussian_likelihoods(&outputs, &[0.39, 0.0], &noise).is_err());
    }

    #[test]
    fn evidence_cases() {
        let l = [0.2, 0.4, 0.9];
        let c = estimate_pop_evidence(&[1.0; 3], &l).unwrap();
        assert_relative_eq!(c, 0.5, max_relative = 1e-14);
        assert_eq!(estimate_pop_evidence(&[1.0; 3], &[0.0; 3]), Err(PopInferError::ZeroEvidence));
        let est = estimate_log_evidence(&[0.0, 0.0], &[-800.0, -801.0]).unwrap();
        assert!(est.ln_value.is_finite());
        assert_relative_eq!(est.ln_value, -800.0 + ((1.0 + (-1.0_f64).exp()) / 2.0).ln(), max_relative = 1e-14);
    }

    #[test]
    fn kl_of_constant_likelihood_is_zero() {
        let kl = mc_kl_estimate(&[1.0; 5], &[0.3; 5], 0.3).unwrap();
        assert!(kl.value.abs() < 1e-15);
        assert!(mc_kl_estimate(&[1.0; 5], &[0.3; 5], 0.0).is_err());
    }

    #[test]
    fn rejects_negative_inputs() {
        assert!(estimate_pop_evidence(&[1.0, -1.0], &[1.0, 1.0]).is_err());
        assert!(estimate_pop_evidence(&[1.0], &[1.0, 1.0]).is_err());
    }
}
