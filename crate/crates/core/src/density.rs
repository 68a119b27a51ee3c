//! Densities used as initial/prior/truth distributions and the evaluator
//! trait consumed by the sampling pipeline.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{PopInferError, Result};
use crate::gaussian::GaussianDensity;

/// Anything that can report a log density at a point.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    fn ln_pdf(&self, x: &[f64]) -> f64;
}

impl LogDensity for GaussianDensity {
    fn dim(&self) -> usize {
        GaussianDensity::dim(self)
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).unwrap_or(f64::NAN)
    }
}

/// Product of independent uniforms over an axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl UniformBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(PopInferError::dims("uniform box bounds", lower.len(), upper.len()));
        }
        if lower.is_empty() || lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(PopInferError::InvalidArgument(
                "uniform box needs finite bounds with lower < upper".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lower.len()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| v >= l && v <= u)
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> DMatrix<f64> {
        let d = self.lower.len();
        let mut out = DMatrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                let t: f64 = rng.random();
                out[(i, j)] = self.lower[j] + t * (self.upper[j] - self.lower[j]);
            }
        }
        out
    }
}

impl LogDensity for UniformBox {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        if self.contains(x) {
            -self.volume().ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// An initial, prior or population-generating density over parameters.
#[derive(Debug, Clone)]
pub enum ParameterDensity {
    Gaussian(GaussianDensity),
    Uniform(UniformBox),
}

impl ParameterDensity {
    pub fn dim(&self) -> usize {
        match self {
            ParameterDensity::Gaussian(g) => g.dim(),
            ParameterDensity::Uniform(u) => u.lower.len(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> DMatrix<f64> {
        match self {
            ParameterDensity::Gaussian(g) => g.sample(rng, n),
            ParameterDensity::Uniform(u) => u.sample(rng, n),
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianDensity> {
        match self {
            ParameterDensity::Gaussian(g) => Some(g),
            ParameterDensity::Uniform(_) => None,
        }
    }
}

impl LogDensity for ParameterDensity {
    fn dim(&self) -> usize {
        ParameterDensity::dim(self)
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        match self {
            ParameterDensity::Gaussian(g) => LogDensity::ln_pdf(g, x),
            ParameterDensity::Uniform(u) => u.ln_pdf(x),
        }
    }
}
