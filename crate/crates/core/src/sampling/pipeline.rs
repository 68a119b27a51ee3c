//! The sampling pipeline end to end.
//!
//! The data-independent half (model evaluations, KDE, ratio weights and the
//! diagnostic) lives in [`PreparedEnsemble`] and is shared by every data
//! realization; [`PreparedEnsemble::infer`] adds likelihoods, evidences,
//! rejection sampling and KL estimates for one `y`. The same initial samples
//! are reused for all of these steps, so the estimates are correlated.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::bayes_linear::relative_gain_from_kl;
use crate::density::LogDensity;
use crate::error::Result;
use crate::forward_models::ForwardModel;
use crate::sampling::ensemble::{
    diagnostic_mean_ratio, estimate_log_evidence, gaussian_log_likelihoods, log_ratio_weights,
    mc_kl_estimate_log, EvidenceEstimate, KlEstimate, MeanRatioDiagnostic, SampleEnsemble,
};
use crate::sampling::kde::{BandwidthRule, KernelDensityEstimate};
use crate::sampling::rejection::{rejection_sample, RejectionResult};

#[derive(Debug, Clone)]
pub struct PreparedEnsemble {
    pub ensemble: SampleEnsemble,
    pub kde: KernelDensityEstimate,
    pub diagnostic: MeanRatioDiagnostic,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampledInference {
    pub evidence_standard: EvidenceEstimate,
    pub evidence_pop: EvidenceEstimate,
    pub standard: RejectionResult,
    pub population: RejectionResult,
    pub kl_standard: KlEstimate,
    pub kl_pop: KlEstimate,
    pub relative_gain: Option<f64>,
}

impl PreparedEnsemble {
    /// Data-independent part: evaluate models, fit the predicted-density KDE, compute
    /// ratio weights and the mean-ratio diagnostic.
    pub fn build(
        params: DMatrix<f64>,
        pop_model: &ForwardModel,
        ind_model: &ForwardModel,
        observed: &dyn LogDensity,
        rule: BandwidthRule,
    ) -> Result<Self> {
        let mut ensemble = SampleEnsemble::evaluate(params, pop_model, ind_model)?;
        let kde = KernelDensityEstimate::fit(ensemble.pop_outputs(), rule)?;
        let log_weights = log_ratio_weights(ensemble.pop_outputs(), observed, &kde)?;
        let diagnostic = diagnostic_mean_ratio(&log_weights.iter().map(|v| v.exp()).collect::<Vec<_>>());
        ensemble.set_log_weights(log_weights)?;
        Ok(Self {
            ensemble,
            kde,
            diagnostic,
        })
    }

    /// Rejection sample of the updated density alone (likelihood ≡ 1).
    pub fn sample_updated<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<RejectionResult> {
        let e = self.ensemble.with_unit_likelihoods();
        let evidence = estimate_log_evidence(e.log_weights(), e.log_likelihoods())?;
        rejection_sample(&e, evidence.ln_value, rng)
    }

    /// Likelihoods, evidences, KL estimates and the accept-reject loop for one
    /// data vector, for both the population-informed and the standard posterior.
    pub fn infer<R: Rng + ?Sized>(
        &self,
        data: &[f64],
        noise_covariance: &DMatrix<f64>,
        rng: &mut R,
    ) -> Result<SampledInference> {
        let mut pop = self.ensemble.clone();
        pop.set_log_likelihoods(gaussian_log_likelihoods(pop.ind_outputs(), data, noise_covariance)?)?;
        let standard = pop.with_unit_weights();

        let evidence_pop = estimate_log_evidence(pop.log_weights(), pop.log_likelihoods())?;
        let evidence_standard = estimate_log_evidence(standard.log_weights(), standard.log_likelihoods())?;
        let population = rejection_sample(&pop, evidence_pop.ln_value, rng)?;
        let standard_rs = rejection_sample(&standard, evidence_standard.ln_value, rng)?;
        let kl_pop = mc_kl_estimate_log(pop.log_weights(), pop.log_likelihoods(), evidence_pop.ln_value)?;
        let kl_standard = mc_kl_estimate_log(
            standard.log_weights(),
            standard.log_likelihoods(),
            evidence_standard.ln_value,
        )?;
        Ok(SampledInference {
            evidence_standard,
            evidence_pop,
            standard: standard_rs,
            population,
            kl_standard,
            kl_pop,
            relative_gain: relative_gain_from_kl(kl_pop.value, kl_standard.value).ok(),
        })
    }
}
