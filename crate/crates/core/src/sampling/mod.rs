//! Sampling pipeline for nonlinear and non-Gaussian problems.

pub mod ensemble;
pub mod kde;
pub mod pipeline;
pub mod rejection;

pub use ensemble::{
    diagnostic_mean_ratio, estimate_log_evidence, estimate_pop_evidence, gaussian_likelihoods,
    gaussian_log_likelihoods, log_ratio_weights, mc_kl_estimate, mc_kl_estimate_log, ratio_weights,
    EvidenceEstimate, KlEstimate, MeanRatioDiagnostic, SampleEnsemble,
};
pub use kde::{fit_kde, BandwidthRule, KernelDensityEstimate};
pub use pipeline::{PreparedEnsemble, SampledInference};
pub use rejection::{rejection_sample, RejectionResult};
