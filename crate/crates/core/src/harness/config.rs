//! JSON experiment configuration and its validation into typed objects.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dci_linear::DEFAULT_PREDICTABILITY_TOLERANCE;
use crate::density::{ParameterDensity, UniformBox};
use crate::error::{PopInferError, Result};
use crate::forward_models::{model_by_name, DataGenerator, ForwardModel};
use crate::gaussian::{GaussianDensity, LinearMap};
use crate::linalg;
use crate::sampling::BandwidthRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Analytic,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
}

/// Either a row-major matrix literal or a registry entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSpec {
    Matrix(Vec<Vec<f64>>),
    Named {
        model: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        qoi: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// Explicit data vectors, one per realization.
    Values(Vec<Vec<f64>>),
    /// Synthetic data drawn through the individual model.
    Generator { truth: DensitySpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    /// Initial density; also the prior of the standard inference.
    pub initial: DensitySpec,
    pub pop_map: MapSpec,
    pub observed: DensitySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ind_map: Option<MapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_cov: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSpec>,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_n_realizations")]
    pub n_realizations: usize,
    pub seed: u64,
    #[serde(default)]
    pub kde_bandwidth: BandwidthRule,
    #[serde(default = "default_ood_alpha")]
    pub ood_alpha: f64,
    #[serde(default = "default_tolerance")]
    pub predictability_tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_n_samples() -> usize {
    100_000
}

fn default_n_realizations() -> usize {
    1
}

fn default_ood_alpha() -> f64 {
    0.05
}

fn default_tolerance() -> f64 {
    DEFAULT_PREDICTABILITY_TOLERANCE
}

fn config_err(e: PopInferError, what: &str) -> PopInferError {
    match e {
        PopInferError::Config(_) => e,
        other => PopInferError::Config(format!("{what}: {other}")),
    }
}

impl DensitySpec {
    pub fn build(&self) -> Result<ParameterDensity> {
        match self {
            DensitySpec::Gaussian { mean, cov } => Ok(ParameterDensity::Gaussian(GaussianDensity::from_slices(mean, cov)?)),
            DensitySpec::Uniform { lower, upper } => Ok(ParameterDensity::Uniform(UniformBox::new(lower.clone(), upper.clone())?)),
        }
    }
}

impl MapSpec {
    pub fn build(&self) -> Result<ForwardModel> {
        match self {
            MapSpec::Matrix(rows) => Ok(ForwardModel::linear(LinearMap::from_rows(rows)?)),
            MapSpec::Named { model, matrix, qoi } => {
                let m = matrix.as_deref().map(linalg::matrix_from_rows).transpose()?;
                model_by_name(model, qoi.as_deref(), m)
            }
        }
    }
}

/// Where each realization's data vector comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Values(DMatrix<f64>),
    Generator(Box<DataGenerator>),
}

#[derive(Debug, Clone)]
pub struct IndividualSetup {
    pub model: ForwardModel,
    pub noise_covariance: DMatrix<f64>,
    pub data: DataSource,
}

/// A validated configuration with every density and model constructed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub initial: ParameterDensity,
    pub pop_model: ForwardModel,
    pub observed: GaussianDensity,
    pub individual: Option<IndividualSetup>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| PopInferError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PopInferError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<Experiment> {
        let initial = self.initial.build().map_err(|e| config_err(e, "initial"))?;
        let pop_model = self.pop_map.build().map_err(|e| config_err(e, "pop_map"))?;
        let observed = match self.observed.build().map_err(|e| config_err(e, "observed"))? {
            ParameterDensity::Gaussian(g) => g,
            ParameterDensity::Uniform(_) => {
                return Err(PopInferError::Config("observed density must be gaussian".into()))
            }
        };
        let n = initial.dim();
        if pop_model.input_dim() != n {
            return Err(PopInferError::Config(format!(
                "pop_map takes {} parameters, initial density has {n}",
                pop_model.input_dim()
            )));
        }
        if observed.dim() != pop_model.output_dim() {
            return Err(PopInferError::Config(format!(
                "observed density has dimension {}, pop_map outputs {}",
                observed.dim(),
                pop_model.output_dim()
            )));
        }
        if !(self.ood_alpha > 0.0 && self.ood_alpha < 1.0) {
            return Err(PopInferError::Config("ood_alpha must lie in (0, 1)".into()));
        }
        if self.n_realizations == 0 {
            return Err(PopInferError::Config("n_realizations must be >= 1".into()));
        }
        if self.pipeline == Pipeline::Sampled && self.n_samples < 2 {
            return Err(PopInferError::Config("sampled pipeline needs n_samples >= 2".into()));
        }
        if self.pipeline == Pipeline::Analytic {
            if initial.as_gaussian().is_none() {
                return Err(PopInferError::Config("analytic pipeline needs a gaussian initial density".into()));
            }
            if pop_model.as_linear().is_none() {
                return Err(PopInferError::Config("analytic pipeline needs a linear pop_map".into()));
            }
        }

        let individual = match (&self.ind_map, &self.noise_cov, &self.data) {
            (None, None, None) => None,
            (Some(map), Some(noise), Some(data)) => Some(self.individual_setup(map, noise, data, n)?),
            _ => {
                return Err(PopInferError::Config(
                    "ind_map, noise_cov and data must be given together".into(),
                ))
            }
        };

        Ok(Experiment {
            config: self.clone(),
            initial,
            pop_model,
            observed,
            individual,
        })
    }

    fn individual_setup(&self, map: &MapSpec, noise: &[Vec<f64>], data: &DataSpec, n: usize) -> Result<IndividualSetup> {
        let model = map.build().map_err(|e| config_err(e, "ind_map"))?;
        if model.input_dim() != n {
            return Err(PopInferError::Config(format!(
                "ind_map takes {} parameters, initial density has {n}",
                model.input_dim()
            )));
        }
        if self.pipeline == Pipeline::Analytic && model.as_linear().is_none() {
            return Err(PopInferError::Config("analytic pipeline needs a linear ind_map".into()));
        }
        let m = model.output_dim();
        let noise_covariance = linalg::matrix_from_rows(noise).map_err(|e| config_err(e, "noise_cov"))?;
        // validates shape, symmetry and definiteness
        GaussianDensity::new(nalgebra::DVector::zeros(noise_covariance.nrows()), noise_covariance.clone())
            .map_err(|e| config_err(e, "noise_cov"))?;
        if noise_covariance.nrows() != m {
            return Err(PopInferError::Config(format!(
                "noise_cov is {}x{}, ind_map outputs {m}",
                noise_covariance.nrows(),
                noise_covariance.ncols()
            )));
        }
        let data = match data {
            DataSpec::Values(rows) => {
                let values = linalg::matrix_from_rows(rows).map_err(|e| config_err(e, "data.values"))?;
                if values.nrows() == 0 || values.ncols() != m {
                    return Err(PopInferError::Config(format!("data.values rows must have length {m}")));
                }
                if values.nrows() != self.n_realizations && self.n_realizations != 1 {
                    return Err(PopInferError::Config(
                        "n_realizations must match the number of data.values rows".into(),
                    ));
                }
                DataSource::Values(values)
            }
            DataSpec::Generator { truth } => {
                let truth = truth.build().map_err(|e| config_err(e, "data.generator.truth"))?;
                let gen = DataGenerator::new(model.clone(), noise_covariance.clone(), truth)
                    .map_err(|e| config_err(e, "data.generator"))?;
                DataSource::Generator(Box::new(gen))
            }
        };
        Ok(IndividualSetup {
            model,
            noise_covariance,
            data,
        })
    }
}

impl Experiment {
    /// Number of data realizations this experiment runs.
    pub fn realizations(&self) -> usize {
        match self.individual.as_ref().map(|i| &i.data) {
            Some(DataSource::Values(v)) => v.nrows(),
            Some(DataSource::Generator(_)) => self.config.n_realizations,
            None => 0,
        }
    }

    /// Data vector of realization `index`, drawn from that realization's
    /// own stream when synthetic.
    pub fn data_for(&self, index: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let ind = self
            .individual
            .as_ref()
            .ok_or_else(|| PopInferError::Config("no individual data configured".into()))?;
        match &ind.data {
            DataSource::Values(v) => Ok(v.row(index).iter().copied().collect()),
            DataSource::Generator(gen) => Ok(gen.generate(rng, 1)?.row(0).iter().copied().collect()),
        }
    }
}

/// Stream 0 of the master seed; used for the initial ensemble.
pub fn ensemble_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for realization `index`, so results do not depend on
/// the order in which realizations are processed.
pub fn realization_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}
