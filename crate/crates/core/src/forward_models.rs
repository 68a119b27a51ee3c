//! Parameter-to-observable maps and synthetic data generation.
//!
//! Besides dense linear maps this provides a closed-form stand-in for the
//! dog-bone tensile test: inputs are Young's modulus `E` (GPa) and Poisson's
//! ratio `ν` on the steel box `[180, 210] × [0.25, 0.35]`, and the two
//! quantities of interest are
//!
//! * population QoI `f_p(E, ν) = c_p (1 − ν²) / E`
//! * individual QoI `f_i(E, ν) = c_i ν (1 + ν) / E`
//!
//! The scales `c_p`, `c_i` put the push-forward means of the uniform box at
//! `2.8e-4` and `1.3e-5`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::density::{ParameterDensity, UniformBox};
use crate::error::{PopInferError, Result};
use crate::gaussian::{GaussianDensity, LinearMap};

pub const DOGBONE_E_RANGE: (f64, f64) = (180.0, 210.0);
pub const DOGBONE_NU_RANGE: (f64, f64) = (0.25, 0.35);
/// `2.8e-4 / E[(1 − ν²)/E]` over the uniform box.
pub const DOGBONE_POP_SCALE: f64 = 0.059_936_356_262_034_18;
/// `1.3e-5 / E[ν(1 + ν)/E]` over the uniform box.
pub const DOGBONE_IND_SCALE: f64 = 0.006_473_327_298_693_503;

type Evaluator = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;

#[derive(Clone)]
enum ModelKind {
    Linear(LinearMap),
    DogbonePopulation,
    DogboneIndividual,
    Custom(Evaluator),
}

/// Deterministic map from a parameter vector to an output vector.
#[derive(Clone)]
pub struct ForwardModel {
    name: String,
    input_dim: usize,
    output_dim: usize,
    kind: ModelKind,
}

impl fmt::Debug for ForwardModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForwardModel")
            .field("name", &self.name)
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .finish()
    }
}

impl ForwardModel {
    pub fn linear(map: LinearMap) -> Self {
        Self {
            name: "linear".into(),
            input_dim: map.cols(),
            output_dim: map.rows(),
            kind: ModelKind::Linear(map),
        }
    }

    pub fn custom<F>(name: impl Into<String>, input_dim: usize, output_dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            input_dim,
            output_dim,
            kind: ModelKind::Custom(Arc::new(f)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn as_linear(&self) -> Option<&LinearMap> {
        match &self.kind {
            ModelKind::Linear(m) => Some(m),
            _ => None,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(PopInferError::dims("model input", self.input_dim, x.len()));
        }
        let out = match &self.kind {
            ModelKind::Linear(m) => m.apply(x)?,
            ModelKind::DogbonePopulation => {
                let (e, nu) = dogbone_inputs(x)?;
                vec![DOGBONE_POP_SCALE * (1.0 - nu * nu) / e]
            }
            ModelKind::DogboneIndividual => {
                let (e, nu) = dogbone_inputs(x)?;
                vec![DOGBONE_IND_SCALE * nu * (1.0 + nu) / e]
            }
            ModelKind::Custom(f) => f(x)?,
        };
        if out.len() != self.output_dim {
            return Err(PopInferError::dims("model output", self.output_dim, out.len()));
        }
        Ok(out)
    }

    /// Evaluates every row of `params`; row order is preserved.
    pub fn evaluate_rows(&self, params: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if params.ncols() != self.input_dim {
            return Err(PopInferError::dims("model input", self.input_dim, params.ncols()));
        }
        if let ModelKind::Linear(m) = &self.kind {
            return Ok(params * m.matrix().transpose());
        }
        let rows: Vec<Vec<f64>> = (0..params.nrows())
            .into_par_iter()
            .map(|i| {
                let x: Vec<f64> = params.row(i).iter().copied().collect();
                self.evaluate(&x)
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(rows.len(), self.output_dim, |i, j| rows[i][j]))
    }
}

/// Wraps a full-row-rank matrix as a forward model.
pub fn linear_model(matrix: DMatrix<f64>) -> Result<ForwardModel> {
    Ok(ForwardModel::linear(LinearMap::new(matrix)?))
}

fn dogbone_inputs(x: &[f64]) -> Result<(f64, f64)> {
    let (e, nu) = (x[0], x[1]);
    for (component, value, (lower, upper)) in [(0, e, DOGBONE_E_RANGE), (1, nu, DOGBONE_NU_RANGE)] {
        if !(value >= lower && value <= upper) {
            return Err(PopInferError::DomainViolation {
                component,
                value,
                lower,
                upper,
            });
        }
    }
    Ok((e, nu))
}

/// `(f_p, f_i)` for the dog-bone stand-in.
pub fn dogbone_surrogate() -> (ForwardModel, ForwardModel) {
    let make = |name: &str, kind| ForwardModel {
        name: name.into(),
        input_dim: 2,
        output_dim: 1,
        kind,
    };
    (
        make("dogbone_population", ModelKind::DogbonePopulation),
        make("dogbone_individual", ModelKind::DogboneIndividual),
    )
}

/// Uniform steel prior over `(E, ν)`.
pub fn dogbone_prior_box() -> UniformBox {
    UniformBox::new(
        vec![DOGBONE_E_RANGE.0, DOGBONE_NU_RANGE.0],
        vec![DOGBONE_E_RANGE.1, DOGBONE_NU_RANGE.1],
    )
    .expect("static bounds are valid")
}

/// Lamé parameters `(λ, μ)` from Young's modulus and Poisson's ratio.
pub fn lame_parameters(youngs_modulus: f64, poisson_ratio: f64) -> (f64, f64) {
    let (e, nu) = (youngs_modulus, poisson_ratio);
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    (lambda, mu)
}

/// Looks up a named model. `qoi` selects the dog-bone output
/// (`"population"` or `"individual"`).
pub fn model_by_name(name: &str, qoi: Option<&str>, matrix: Option<DMatrix<f64>>) -> Result<ForwardModel> {
    match name {
        "linear" => {
            let m = matrix.ok_or_else(|| PopInferError::Config("linear model needs a matrix".into()))?;
            linear_model(m)
        }
        "dogbone_surrogate" => {
            let (pop, ind) = dogbone_surrogate();
            match qoi {
                Some("population") => Ok(pop),
                Some("individual") => Ok(ind),
                other => Err(PopInferError::Config(format!(
                    "dogbone_surrogate needs qoi \"population\" or \"individual\", got {other:?}"
                ))),
            }
        }
        other => Err(PopInferError::Config(format!("unknown model {other:?}"))),
    }
}

/// Synthetic individual data: draw `λ` from the truth distribution, apply
/// the model, add Gaussian noise.
#[derive(Debug, Clone)]
pub struct DataGenerator {
    model: ForwardModel,
    noise: GaussianDensity,
    truth: ParameterDensity,
}

impl DataGenerator {
    pub fn new(model: ForwardModel, noise_covariance: DMatrix<f64>, truth: ParameterDensity) -> Result<Self> {
        if noise_covariance.nrows() != model.output_dim() {
            return Err(PopInferError::dims("noise covariance", model.output_dim(), noise_covariance.nrows()));
        }
        if truth.dim() != model.input_dim() {
            return Err(PopInferError::dims("truth distribution", model.input_dim(), truth.dim()));
        }
        let noise = GaussianDensity::new(nalgebra::DVector::zeros(model.output_dim()), noise_covariance)?;
        Ok(Self { model, noise, truth })
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    /// One data vector per row.
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R, n_realizations: usize) -> Result<DMatrix<f64>> {
        let params = self.truth.sample(rng, n_realizations);
        let clean = self.model.evaluate_rows(&params)?;
        let noise = self.noise.sample(rng, n_realizations);
        Ok(clean + noise)
    }
}

pub fn generate_data<R: Rng + ?Sized>(gen: &DataGenerator, rng: &mut R, n_realizations: usize) -> Result<DMatrix<f64>> {
    gen.generate(rng, n_realizations)
}
