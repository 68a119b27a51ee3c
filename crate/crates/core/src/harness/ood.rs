//! Out-of-distribution flag for individual data.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{PopInferError, Result};
use crate::gaussian::GaussianDensity;
use crate::sampling::KernelDensityEstimate;

/// Push-forward of a prior through the individual model, either exact or
/// estimated from samples.
#[derive(Debug, Clone, Copy)]
pub enum PushforwardReference<'a> {
    Gaussian(&'a GaussianDensity),
    Kde(&'a KernelDensityEstimate),
}

/// Highest-density region test at level `1 - alpha`, with the threshold
/// computed once.
#[derive(Debug, Clone)]
pub struct OodTest<'a> {
    reference: PushforwardReference<'a>,
    threshold: f64,
}

impl<'a> OodTest<'a> {
    pub fn new(reference: PushforwardReference<'a>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(PopInferError::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let threshold = match reference {
            // Mahalanobis radius of the central region
            PushforwardReference::Gaussian(g) => {
                let chi2 = ChiSquared::new(g.dim() as f64).expect("dimension is positive");
                chi2.inverse_cdf(1.0 - alpha)
            }
            // log-density level exceeded by a fraction 1 - alpha of the samples
            PushforwardReference::Kde(kde) => {
                let mut levels = kde.ln_pdf_at_support();
                levels.sort_by(f64::total_cmp);
                let k = ((alpha * levels.len() as f64).floor() as usize).min(levels.len() - 1);
                levels[k]
            }
        };
        Ok(Self { reference, threshold })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `true` when `y` lies outside the central region.
    pub fn flag(&self, y: &[f64]) -> Result<bool> {
        match self.reference {
            PushforwardReference::Gaussian(g) => Ok(g.mahalanobis_sq(y)? > self.threshold),
            PushforwardReference::Kde(kde) => {
                if y.len() != crate::density::LogDensity::dim(kde) {
                    return Err(PopInferError::dims("data", crate::density::LogDensity::dim(kde), y.len()));
                }
                Ok(kde.ln_pdf_at(y) < self.threshold)
            }
        }
    }
}

pub fn ood_flag(y: &[f64], reference: PushforwardReference<'_>, alpha: f64) -> Result<bool> {
    OodTest::new(reference, alpha)?.flag(y)
}
