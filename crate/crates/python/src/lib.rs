//! Python module `popinfer`: Gaussian densities, linear data-consistent
//! inversion, linear-Gaussian posteriors, KDE, and config-driven runs.
//!
//! Matrices cross the boundary as lists of rows.

use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use popinfer_core::harness::{self, ExperimentConfig};
use popinfer_core::sampling::{BandwidthRule, KernelDensityEstimate};
use popinfer_core::{bayes_linear, dci_linear, linalg, LinearMap, PopInferError};

create_exception!(popinfer, PopInferException, PyException);

fn py_err(e: PopInferError) -> PyErr {
    PopInferException::new_err(e.to_string())
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    linalg::matrix_to_rows(m)
}

fn linear_map(rows: Vec<Vec<f64>>) -> PyResult<LinearMap> {
    LinearMap::from_rows(&rows).map_err(py_err)
}

#[pyclass(name = "GaussianDensity", module = "popinfer", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGaussian {
    inner: popinfer_core::GaussianDensity,
}

#[pymethods]
impl PyGaussian {
    #[new]
    fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = popinfer_core::GaussianDensity::from_slices(&mean, &cov).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean().iter().copied().collect()
    }

    #[getter]
    fn cov(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.covariance())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_pdf(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.log_pdf(&x).map_err(py_err)
    }

    /// `n` draws as rows, from a ChaCha8 stream seeded with `seed`.
    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        to_rows(&self.inner.sample(&mut ChaCha8Rng::seed_from_u64(seed), n))
    }

    fn pushforward(&self, matrix: Vec<Vec<f64>>) -> PyResult<Self> {
        let map = linear_map(matrix)?;
        Ok(Self {
            inner: self.inner.pushforward(&map).map_err(py_err)?,
        })
    }

    /// `KL(self ‖ other)` in nats.
    fn kl_divergence(&self, other: &PyGaussian) -> PyResult<f64> {
        self.inner.kl_divergence(&other.inner).map_err(py_err)
    }

    /// `(det(Γ⁻¹), trace(Γ⁻¹))`.
    fn precision_summaries(&self) -> (f64, f64) {
        let s = self.inner.precision_summaries();
        (s.det_of_inverse, s.trace_of_inverse)
    }

    fn __repr__(&self) -> String {
        format!("GaussianDensity(mean={:?}, cov={:?})", self.mean(), self.cov())
    }
}

#[pyclass(name = "KDE", module = "popinfer", frozen)]
pub struct PyKde {
    inner: KernelDensityEstimate,
}

#[pymethods]
impl PyKde {
    #[getter]
    fn bandwidths(&self) -> Vec<f64> {
        self.inner.bandwidths().to_vec()
    }

    fn log_pdf(&self, x: Vec<f64>) -> f64 {
        self.inner.ln_pdf_at(&x)
    }

    fn pdf(&self, x: Vec<f64>) -> f64 {
        self.inner.pdf(&x)
    }
}

/// Gaussian KDE of the rows of `outputs`; `rule` is "scott" or "silverman".
#[pyfunction]
#[pyo3(signature = (outputs, rule = "scott"))]
fn fit_kde(outputs: Vec<Vec<f64>>, rule: &str) -> PyResult<PyKde> {
    let rule = match rule {
        "scott" => BandwidthRule::Scott,
        "silverman" => BandwidthRule::Silverman,
        other => return Err(PopInferException::new_err(format!("unknown bandwidth rule {other:?}"))),
    };
    let m = linalg::matrix_from_rows(&outputs).map_err(py_err)?;
    Ok(PyKde {
        inner: KernelDensityEstimate::fit(&m, rule).map_err(py_err)?,
    })
}

#[pyfunction]
fn predictability_spectrum(initial: &PyGaussian, pop_map: Vec<Vec<f64>>, observed: &PyGaussian) -> PyResult<Vec<f64>> {
    let map = linear_map(pop_map)?;
    let s = dci_linear::predictability_spectrum(&initial.inner, &map, &observed.inner).map_err(py_err)?;
    Ok(s.singular_values)
}

#[pyfunction]
fn updated_density(initial: &PyGaussian, pop_map: Vec<Vec<f64>>, observed: &PyGaussian) -> PyResult<PyGaussian> {
    let map = linear_map(pop_map)?;
    let inner = dci_linear::updated_density(&initial.inner, &map, &observed.inner).map_err(py_err)?;
    Ok(PyGaussian { inner })
}

fn problem(
    prior: &PyGaussian,
    ind_map: Vec<Vec<f64>>,
    noise_cov: Vec<Vec<f64>>,
    y: Vec<f64>,
) -> PyResult<bayes_linear::LinearGaussianProblem> {
    let map = linear_map(ind_map)?;
    let noise = linalg::matrix_from_rows(&noise_cov).map_err(py_err)?;
    bayes_linear::LinearGaussianProblem::new(prior.inner.clone(), map, noise, y).map_err(py_err)
}

/// `(standard, population_informed, updated)` posteriors of a linear-Gaussian
/// problem.
#[pyfunction]
fn posteriors(
    prior: &PyGaussian,
    ind_map: Vec<Vec<f64>>,
    noise_cov: Vec<Vec<f64>>,
    y: Vec<f64>,
    pop_map: Vec<Vec<f64>>,
    observed: &PyGaussian,
) -> PyResult<(PyGaussian, PyGaussian, PyGaussian)> {
    let p = problem(prior, ind_map, noise_cov, y)?;
    let c = bayes_linear::compare_linear(&p, &linear_map(pop_map)?, &observed.inner).map_err(py_err)?;
    Ok((
        PyGaussian { inner: c.standard },
        PyGaussian { inner: c.population },
        PyGaussian { inner: c.updated },
    ))
}

/// Precision summaries and KL divergences of both posteriors, as a dict.
#[pyfunction]
fn compare_inferences<'py>(
    py: Python<'py>,
    prior: &PyGaussian,
    ind_map: Vec<Vec<f64>>,
    noise_cov: Vec<Vec<f64>>,
    y: Vec<f64>,
    pop_map: Vec<Vec<f64>>,
    observed: &PyGaussian,
) -> PyResult<Bound<'py, PyDict>> {
    let p = problem(prior, ind_map, noise_cov, y)?;
    let r = bayes_linear::compare_inferences(&p, &linear_map(pop_map)?, &observed.inner).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("det_inv_standard", r.det_inv_standard)?;
    d.set_item("det_inv_pop", r.det_inv_pop)?;
    d.set_item("trace_inv_standard", r.trace_inv_standard)?;
    d.set_item("trace_inv_pop", r.trace_inv_pop)?;
    d.set_item("kl_standard", r.kl_standard)?;
    d.set_item("kl_pop", r.kl_pop)?;
    d.set_item("relative_gain", r.relative_gain)?;
    Ok(d)
}

#[pyfunction]
fn relative_information_gain(post_pop: &PyGaussian, post_std: &PyGaussian, reference: &PyGaussian) -> PyResult<f64> {
    bayes_linear::relative_information_gain(&post_pop.inner, &post_std.inner, &reference.inner).map_err(py_err)
}

/// Runs a JSON config (as text) and returns `report.json` as text.
#[pyfunction]
fn run_config(config_json: &str, out_dir: PathBuf) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    let report = harness::run_single(&cfg, &out_dir).map_err(py_err)?;
    harness::to_json_string(&report).map_err(py_err)
}

#[pymodule]
fn popinfer(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PopInferError", m.py().get_type::<PopInferException>())?;
    m.add_class::<PyGaussian>()?;
    m.add_class::<PyKde>()?;
    m.add_function(wrap_pyfunction!(fit_kde, m)?)?;
    m.add_function(wrap_pyfunction!(predictability_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(updated_density, m)?)?;
    m.add_function(wrap_pyfunction!(posteriors, m)?)?;
    m.add_function(wrap_pyfunction!(compare_inferences, m)?)?;
    m.add_function(wrap_pyfunction!(relative_information_gain, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
