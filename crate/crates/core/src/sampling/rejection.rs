use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{PopInferError, Result};
use crate::sampling::ensemble::SampleEnsemble;

#[derive(Debug, Clone, Serialize)]
pub struct RejectionResult {
    #[serde(skip)]
    pub accepted_params: DMatrix<f64>,
    /// Row indices into the input ensemble, ascending.
    pub accepted_indices: Vec<usize>,
    pub acceptance_rate: f64,
    /// `M = max_j α_j`.
    pub scale_m: f64,
}

/// Accept-reject pass over the ensemble with acceptance probability
/// `α_j / M`, `α_j = w_j L_j / C̃`, `M` the largest `α_j` in the ensemble.
///
/// One uniform is drawn per sample, in index order.
pub fn rejection_sample<R: Rng + ?Sized>(
    ensemble: &SampleEnsemble,
    ln_evidence: f64,
    rng: &mut R,
) -> Result<RejectionResult> {
    if !ln_evidence.is_finite() {
        return Err(PopInferError::ZeroEvidence);
    }
    let ln_alpha: Vec<f64> = ensemble
        .log_products()
        .into_iter()
        .map(|v| v - ln_evidence)
        .collect();
    let ln_m = ln_alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if ln_m == f64::NEG_INFINITY {
        return Err(PopInferError::AllRejected);
    }
    let mut accepted_indices = Vec::new();
    for (j, la) in ln_alpha.iter().enumerate() {
        let t: f64 = rng.random();
        if t < (la - ln_m).exp() {
            accepted_indices.push(j);
        }
    }
    if accepted_indices.is_empty() {
        return Err(PopInferError::AllRejected);
    }
    let params = ensemble.params();
    let accepted_params = DMatrix::from_fn(accepted_indices.len(), params.ncols(), |r, c| {
        params[(accepted_indices[r], c)]
    });
    Ok(RejectionResult {
        acceptance_rate: accepted_indices.len() as f64 / ensemble.len() as f64,
        accepted_params,
        accepted_indices,
        scale_m: ln_m.exp(),
    })
}
