mod common;

use common::*;
use nalgebra::DMatrix;
use popinfer_core::density::{ParameterDensity, UniformBox};
use popinfer_core::forward_models::{dogbone_prior_box, dogbone_surrogate, DataGenerator};
use popinfer_core::{generate_data, GaussianDensity, PopInferError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn surrogate_scales_match_observed_magnitudes() {
    // Monte Carlo over the prior box, independent of the closed-form constants.
    let (pop, ind) = dogbone_surrogate();
    let prior = dogbone_prior_box();
    let params = prior.sample(&mut ChaCha8Rng::seed_from_u64(1), 200_000);
    let fp = pop.evaluate_rows(&params).unwrap();
    let fi = ind.evaluate_rows(&params).unwrap();
    let (mp, sp) = mean_and_se(&fp);
    let (mi, si) = mean_and_se(&fi);
    assert!(((mp[0] - 2.8e-4) / sp[0]).abs() < 4.0, "{}", mp[0]);
    assert!(((mi[0] - 1.3e-5) / si[0]).abs() < 4.0, "{}", mi[0]);
    let all_positive = fp.iter().chain(fi.iter()).all(|v| v.is_finite() && *v > 0.0);
    assert!(all_positive);
}

#[test]
fn surrogate_is_decreasing_in_youngs_modulus() {
    let (pop, ind) = dogbone_surrogate();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let e = rng.random_range(180.0..209.9);
        let nu = rng.random_range(0.25..0.35);
        let h = 1e-3;
        let d = |m: &popinfer_core::ForwardModel| {
            (m.evaluate(&[e + h, nu]).unwrap()[0] - m.evaluate(&[e, nu]).unwrap()[0]) / h
        };
        assert!(d(&pop) < 0.0 && d(&ind) < 0.0);
    }
}

#[test]
fn surrogate_rejects_points_outside_box() {
    let (pop, _) = dogbone_surrogate();
    assert!(matches!(pop.evaluate(&[170.0, 0.3]), Err(PopInferError::DomainViolation { component: 0, .. })));
    assert!(matches!(pop.evaluate(&[190.0, 0.4]), Err(PopInferError::DomainViolation { component: 1, .. })));
}

#[test]
fn generated_data_mean() {
    let truth = GaussianDensity::from_slices(&[0.2, 0.3], &[vec![0.06, 0.0], vec![0.0, 0.06]]).unwrap();
    let model = popinfer_core::ForwardModel::linear(map(&[&[2.0, -1.0]]));
    let gen = DataGenerator::new(model, DMatrix::from_element(1, 1, 0.1), ParameterDensity::Gaussian(truth)).unwrap();
    let data = generate_data(&gen, &mut ChaCha8Rng::seed_from_u64(3), 100_000).unwrap();
    let (m, se) = mean_and_se(&data);
    assert!(((m[0] - 0.1) / se[0]).abs() < 4.0, "{}", m[0]);
    // variance is push-forward plus noise
    let (c, cse) = covariance_and_se(&data);
    assert!(((c[(0, 0)] - 0.4) / cse[(0, 0)]).abs() < 4.0);

    let again = generate_data(&gen, &mut ChaCha8Rng::seed_from_u64(3), 100_000).unwrap();
    assert_eq!(data, again);
}

#[test]
fn uniform_truth_generator() {
    let (_, ind) = dogbone_surrogate();
    let truth = ParameterDensity::Uniform(UniformBox::new(vec![195.0, 0.28], vec![200.0, 0.30]).unwrap());
    let gen = DataGenerator::new(ind, DMatrix::from_element(1, 1, 1e-30), truth).unwrap();
    let data = gen.generate(&mut ChaCha8Rng::seed_from_u64(4), 100).unwrap();
    assert!(data.iter().all(|v| *v > 1.0e-5 && *v < 1.6e-5));
}
