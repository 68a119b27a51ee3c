#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use popinfer_core::{GaussianDensity, LinearGaussianProblem, LinearMap};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn init() -> GaussianDensity {
    GaussianDensity::from_slices(&[0.4, 0.0], &[vec![0.15, 0.0], vec![0.0, 0.15]]).unwrap()
}

pub fn observed() -> GaussianDensity {
    GaussianDensity::from_slices(&[0.1], &[vec![0.3]]).unwrap()
}

pub fn map(rows: &[&[f64]]) -> LinearMap {
    LinearMap::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

/// Individual map and noise used throughout the linear experiments.
pub fn problem(y: f64) -> LinearGaussianProblem {
    LinearGaussianProblem::new(init(), map(&[&[2.0, -1.0]]), DMatrix::from_element(1, 1, 0.1), vec![y]).unwrap()
}

pub fn gaussian_pdf_1d(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// SPD matrix with eigenvalues roughly in [0.1, 3].
pub fn random_spd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let q = random_matrix(rng, n, n).qr().q();
    let eig = DVector::from_fn(n, |_, _| rng.random_range(0.1..3.0));
    &q * DMatrix::from_diagonal(&eig) * q.transpose()
}

/// A random problem satisfying predictability: the observed covariance is
/// `P^{1/2} S P^{1/2}` with `P` the predicted covariance and `S ≤ I`.
pub struct RandomDci {
    pub init: GaussianDensity,
    pub map: LinearMap,
    pub observed: GaussianDensity,
}

pub fn random_dci<R: Rng>(rng: &mut R, n: usize, m: usize) -> RandomDci {
    let mean = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let cov = random_spd(rng, n);
    let init = GaussianDensity::new(mean, cov).unwrap();
    let a = loop {
        let a = random_matrix(rng, m, n);
        if let Ok(map) = LinearMap::new(a) {
            break map;
        }
    };
    let predicted = init.pushforward(&a).unwrap();
    let p_half = popinfer_core::linalg::sym_sqrt(predicted.covariance());
    let q = random_matrix(rng, m, m).qr().q();
    let s_eig = DVector::from_fn(m, |_, _| rng.random_range(0.05..1.0));
    let s = &q * DMatrix::from_diagonal(&s_eig) * q.transpose();
    let obs_cov = popinfer_core::linalg::symmetrize(&(&p_half * s * &p_half));
    let shift = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.5);
    let observed = GaussianDensity::new(predicted.mean() + shift, obs_cov).unwrap();
    RandomDci { init, map: a, observed }
}

/// Mean of a sample and the standard error of each component.
pub fn mean_and_se(samples: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = samples.nrows() as f64;
    let mean = popinfer_core::linalg::row_mean(samples);
    let cov = popinfer_core::linalg::row_covariance(samples);
    let se = DVector::from_fn(mean.len(), |i, _| (cov[(i, i)] / n).sqrt());
    (mean, se)
}

/// Sample covariance and the standard error of each entry, from the
/// fourth-moment formula `Var(s_ij) ≈ (E[d_i² d_j²] − s_ij²)/n`.
pub fn covariance_and_se(samples: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = samples.nrows();
    let d = samples.ncols();
    let mean = popinfer_core::linalg::row_mean(samples);
    let cov = popinfer_core::linalg::row_covariance(samples);
    let se = DMatrix::from_fn(d, d, |i, j| {
        let m4 = (0..n)
            .map(|r| ((samples[(r, i)] - mean[i]) * (samples[(r, j)] - mean[j])).powi(2))
            .sum::<f64>()
            / n as f64;
        ((m4 - cov[(i, j)].powi(2)) / n as f64).sqrt()
    });
    (cov, se)
}
