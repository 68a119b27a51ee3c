//! Closed-form standard and population-informed posteriors for
//! `y = B λ + η`, `η ~ N(0, Γ_noise)`, plus information-gain comparisons.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dci_linear;
use crate::error::{PopInferError, Result};
use crate::gaussian::{kl_gaussian, GaussianDensity, LinearMap};
use crate::linalg;

/// Smallest standard-posterior KL that the relative gain will divide by.
pub const MIN_REFERENCE_KL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct LinearGaussianProblem {
    prior: GaussianDensity,
    individual_map: LinearMap,
    noise: GaussianDensity,
    data: DVector<f64>,
}

impl LinearGaussianProblem {
    pub fn new(
        prior: GaussianDensity,
        individual_map: LinearMap,
        noise_covariance: DMatrix<f64>,
        data: Vec<f64>,
    ) -> Result<Self> {
        if individual_map.cols() != prior.dim() {
            return Err(PopInferError::dims("individual map columns", prior.dim(), individual_map.cols()));
        }
        let m = individual_map.rows();
        if noise_covariance.nrows() != m {
            return Err(PopInferError::dims("noise covariance", m, noise_covariance.nrows()));
        }
        if data.len() != m {
            return Err(PopInferError::dims("data vector", m, data.len()));
        }
        let noise = GaussianDensity::new(DVector::zeros(m), noise_covariance)?;
        Ok(Self {
            prior,
            individual_map,
            noise,
            data: DVector::from_vec(data),
        })
    }

    /// Same problem with a different data realization.
    pub fn with_data(&self, data: &[f64]) -> Result<Self> {
        if data.len() != self.data.len() {
            return Err(PopInferError::dims("data vector", self.data.len(), data.len()));
        }
        let mut next = self.clone();
        next.data = DVector::from_column_slice(data);
        Ok(next)
    }

    pub fn prior(&self) -> &GaussianDensity {
        &self.prior
    }

    pub fn individual_map(&self) -> &LinearMap {
        &self.individual_map
    }

    pub fn noise(&self) -> &GaussianDensity {
        &self.noise
    }

    pub fn noise_covariance(&self) -> &DMatrix<f64> {
        self.noise.covariance()
    }

    pub fn data(&self) -> &[f64] {
        self.data.as_slice()
    }

    /// Posterior under an arbitrary Gaussian prior, in precision form.
    pub fn posterior_with_prior(&self, prior: &GaussianDensity) -> Result<GaussianDensity> {
        if prior.dim() != self.individual_map.cols() {
            return Err(PopInferError::dims("prior dimension", self.individual_map.cols(), prior.dim()));
        }
        let b = self.individual_map.matrix();
        let noise_precision = self.noise.precision();
        let bt_noise = b.transpose() * &noise_precision;
        let precision = &bt_noise * b + prior.precision();
        let covariance = linalg::spd_inverse(&linalg::symmetrize(&precision))?;
        let residual = &self.data - b * prior.mean();
        let mean = prior.mean() + &covariance * bt_noise * residual;
        GaussianDensity::new(mean, covariance)
    }
}

pub fn standard_posterior(problem: &LinearGaussianProblem) -> Result<GaussianDensity> {
    problem.posterior_with_prior(problem.prior())
}

/// Posterior with the updated density `N(μ_up, Γ_up)` as prior; the
/// problem's prior plays the role of the initial density.
pub fn population_informed_posterior(
    problem: &LinearGaussianProblem,
    pop_map: &LinearMap,
    observed: &GaussianDensity,
) -> Result<GaussianDensity> {
    let updated = dci_linear::updated_density(problem.prior(), pop_map, observed)?;
    problem.posterior_with_prior(&updated)
}

/// `(KL(post_pop ‖ ref) − KL(post_std ‖ ref)) / KL(post_std ‖ ref)`.
pub fn relative_information_gain(
    post_pop: &GaussianDensity,
    post_std: &GaussianDensity,
    reference: &GaussianDensity,
) -> Result<f64> {
    let kl_pop = kl_gaussian(post_pop, reference)?;
    let kl_std = kl_gaussian(post_std, reference)?;
    relative_gain_from_kl(kl_pop, kl_std)
}

pub fn relative_gain_from_kl(kl_pop: f64, kl_std: f64) -> Result<f64> {
    if kl_std.abs() < MIN_REFERENCE_KL {
        return Err(PopInferError::DegenerateReference { value: kl_std });
    }
    Ok((kl_pop - kl_std) / kl_std)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainReport {
    pub det_inv_standard: f64,
    pub det_inv_pop: f64,
    pub trace_inv_standard: f64,
    pub trace_inv_pop: f64,
    pub kl_standard: f64,
    pub kl_pop: f64,
    /// `None` when the standard KL is too small to normalise by.
    pub relative_gain: Option<f64>,
}

impl GainReport {
    pub fn from_posteriors(
        standard: &GaussianDensity,
        population: &GaussianDensity,
        reference: &GaussianDensity,
    ) -> Result<Self> {
        let std_summary = standard.precision_summaries();
        let pop_summary = population.precision_summaries();
        let kl_standard = kl_gaussian(standard, reference)?;
        let kl_pop = kl_gaussian(population, reference)?;
        Ok(Self {
            det_inv_standard: std_summary.det_of_inverse,
            det_inv_pop: pop_summary.det_of_inverse,
            trace_inv_standard: std_summary.trace_of_inverse,
            trace_inv_pop: pop_summary.trace_of_inverse,
            kl_standard,
            kl_pop,
            relative_gain: relative_gain_from_kl(kl_pop, kl_standard).ok(),
        })
    }
}

/// Both posteriors of one problem, the updated density they share, and the
/// derived metrics.
#[derive(Debug, Clone)]
pub struct LinearComparison {
    pub updated: GaussianDensity,
    pub standard: GaussianDensity,
    pub population: GaussianDensity,
    pub report: GainReport,
}

pub fn compare_linear(
    problem: &LinearGaussianProblem,
    pop_map: &LinearMap,
    observed: &GaussianDensity,
) -> Result<LinearComparison> {
    let updated = dci_linear::updated_density(problem.prior(), pop_map, observed)?;
    let standard = standard_posterior(problem)?;
    let population = problem.posterior_with_prior(&updated)?;
    let report = GainReport::from_posteriors(&standard, &population, problem.prior())?;
    Ok(LinearComparison {
        updated,
        standard,
        population,
        report,
    })
}

pub fn compare_inferences(
    problem: &LinearGaussianProblem,
    pop_map: &LinearMap,
    observed: &GaussianDensity,
) -> Result<GainReport> {
    compare_linear(problem, pop_map, observed).map(|c| c.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn problem(y: f64) -> LinearGaussianProblem {
        LinearGaussianProblem::new(
            GaussianDensity::isotropic(&[0.4, 0.0], 0.15).unwrap(),
            LinearMap::from_rows(&[vec![2.0, -1.0]]).unwrap(),
            DMatrix::from_element(1, 1, 0.1),
            vec![y],
        )
        .unwrap()
    }

    fn obs() -> GaussianDensity {
        GaussianDensity::isotropic(&[0.1], 0.3).unwrap()
    }

    fn close_rel(v: f64, expected: f64, rel: f64) {
        assert!((v - expected).abs() <= rel * expected.abs(), "{v} vs {expected}");
    }

    #[test]
    fn standard_posterior_reference_values() {
        let s = standard_posterior(&problem(0.39)).unwrap().precision_summaries();
        close_rel(s.det_of_inverse, 377.8, 1e-3);
        close_rel(s.trace_of_inverse, 63.3, 1e-3);
    }

    #[test]
    fn population_rows() {
        let a = LinearMap::from_rows(&[vec![2.0, -1.0]]).unwrap();
        let s = population_informed_posterior(&problem(0.39), &a, &obs())
            .unwrap()
            .precision_summaries();
        close_rel(s.det_of_inverse, 444.4, 1e-3);
        close_rel(s.trace_of_inverse, 73.3, 1e-3);

        let a = LinearMap::from_rows(&[vec![1.0, 3.0]]).unwrap();
        let post = population_informed_posterior(&problem(0.39), &a, &obs()).unwrap();
        let s = post.precision_summaries();
        close_rel(s.det_of_inverse, 1862.2, 1e-3);
        close_rel(s.trace_of_inverse, 90.0, 1e-3);
        let c = post.covariance();
        for (v, e) in [(c[(0, 0)], 0.0218), (c[(0, 1)], 0.00644), (c[(1, 1)], 0.0265)] {
            assert!((v - e).abs() < 1e-3);
        }
        let c = standard_posterior(&problem(0.39)).unwrap().covariance().clone();
        for (v, e) in [(c[(0, 0)], 0.044), (c[(0, 1)], 0.0529), (c[(1, 1)], 0.124)] {
            assert!((v - e).abs() < 1e-3);
        }
    }

    #[test]
    fn uninformative_noise_returns_prior() {
        let p = LinearGaussianProblem::new(
            GaussianDensity::isotropic(&[0.4, 0.0], 0.15).unwrap(),
            LinearMap::from_rows(&[vec![2.0, -1.0]]).unwrap(),
            DMatrix::from_element(1, 1, 1e12),
            vec![0.39],
        )
        .unwrap();
        let post = standard_posterior(&p).unwrap();
        assert!((post.mean() - p.prior().mean()).abs().max() < 1e-6);
        assert!((post.covariance() - p.prior().covariance()).abs().max() < 1e-6);
    }

    #[test]
    fn covariance_independent_of_data() {
        let a = LinearMap::from_rows(&[vec![1.0, 3.0]]).unwrap();
        let base = population_informed_posterior(&problem(0.39), &a, &obs()).unwrap();
        for y in [-2.0, 0.0, 0.7, 5.0] {
            let other = population_informed_posterior(&problem(y), &a, &obs()).unwrap();
            assert_eq!(other.covariance(), base.covariance());
            assert_eq!(
                standard_posterior(&problem(y)).unwrap().covariance(),
                standard_posterior(&problem(0.39)).unwrap().covariance()
            );
        }
    }

    #[test]
    fn relative_gain_cases() {
        let post = standard_posterior(&problem(0.39)).unwrap();
        let prior = problem(0.39).prior().clone();
        assert_eq!(relative_information_gain(&post, &post, &prior).unwrap(), 0.0);
        assert!(matches!(
            relative_information_gain(&post, &prior, &prior),
            Err(PopInferError::DegenerateReference { .. })
        ));
    }

    #[test]
    fn consistent_observed_gives_identical_rows() {
        let a = LinearMap::from_rows(&[vec![2.0, -1.0]]).unwrap();
        let p = problem(0.39);
        let predicted = p.prior().pushforward(&a).unwrap();
        let r = compare_inferences(&p, &a, &predicted).unwrap();
        assert_relative_eq!(r.det_inv_pop, r.det_inv_standard, max_relative = 1e-9);
        assert_relative_eq!(r.trace_inv_pop, r.trace_inv_standard, max_relative = 1e-9);
        assert_relative_eq!(r.kl_pop, r.kl_standard, max_relative = 1e-8);
    }

    #[test]
    fn dimension_errors() {
        let err = LinearGaussianProblem::new(
            GaussianDensity::isotropic(&[0.4, 0.0], 0.15).unwrap(),
            LinearMap::from_rows(&[vec![2.0, -1.0]]).unwrap(),
            DMatrix::from_element(1, 1, 0.1),
            vec![0.39, 1.0],
        );
        assert!(matches!(err, Err(PopInferError::DimensionMismatch { .. })));
    }
}
