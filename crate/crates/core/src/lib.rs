//! Population-informed Bayesian inference.
//!
//! Data-consistent inversion (DCI) turns population-level observations into
//! an *updated* density on model parameters, whose push-forward through the
//! population model reproduces the observed distribution. Using that updated
//! density as the prior for inference on one individual gives the
//! population-informed posterior.
//!
//! The crate has two pipelines:
//!
//! * an exact one for linear maps and Gaussian densities
//!   ([`dci_linear`], [`bayes_linear`]), and
//! * a sampling one for general models ([`sampling`]): KDE of the predicted
//!   density, ratio weights, Monte Carlo evidence, and rejection sampling.
//!
//! [`harness`] wires both into config-driven experiments.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes_linear;
pub mod dci_linear;
pub mod density;
pub mod error;
pub mod forward_models;
pub mod gaussian;
pub mod harness;
pub mod linalg;
pub mod sampling;

pub use bayes_linear::{
    compare_inferences, compare_linear, population_informed_posterior, relative_information_gain,
    standard_posterior, GainReport, LinearComparison, LinearGaussianProblem,
};
pub use dci_linear::{
    check_predictability, precision_split, predictability_spectrum, updated_density, Predictability,
    PrecisionSplit, PredictabilitySpectrum,
};
pub use density::{LogDensity, ParameterDensity, UniformBox};
pub use error::{PopInferError, Result};
pub use forward_models::{dogbone_surrogate, generate_data, linear_model, DataGenerator, ForwardModel};
pub use gaussian::{kl_gaussian, GaussianDensity, LinearMap, PrecisionSummaries};
