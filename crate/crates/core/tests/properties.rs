//! Randomized invariants of the linear pipeline.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use popinfer_core::dci_linear::{precision_split, predictability_spectrum, updated_density};
use popinfer_core::linalg::min_eigenvalue;
use popinfer_core::{
    kl_gaussian, population_informed_posterior, standard_posterior, GaussianDensity, LinearGaussianProblem,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn updated_density_is_data_consistent(seed in any::<u64>(), n in 2usize..=3, m_off in 0usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = 1 + m_off % n;
        let p = random_dci(&mut rng, n, m);
        let up = updated_density(&p.init, &p.map, &p.observed).unwrap();
        let push = up.pushforward(&p.map).unwrap();
        prop_assert!(rel_diff(push.covariance(), p.observed.covariance()) < 1e-8);
        let mean_err = (push.mean() - p.observed.mean()).abs().max();
        prop_assert!(mean_err < 1e-8 * p.observed.mean().abs().max().max(1.0));

        let s = predictability_spectrum(&p.init, &p.map, &p.observed).unwrap();
        prop_assert!(s.min_value() >= 1.0 - 1e-8);
        prop_assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));

        let gain = up.precision() - p.init.precision();
        prop_assert!(min_eigenvalue(&gain) >= -1e-10 * gain.abs().max().max(1.0));

        let split = precision_split(&p.init, &p.map, &p.observed).unwrap();
        prop_assert!(rel_diff(&split.updated_precision(), &up.precision()) < 1e-8);
    }

    #[test]
    fn consistent_observed_leaves_initial_unchanged(seed in any::<u64>(), n in 2usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_dci(&mut rng, n, 1);
        let predicted = p.init.pushforward(&p.map).unwrap();
        let up = updated_density(&p.init, &p.map, &predicted).unwrap();
        prop_assert!(rel_diff(up.covariance(), p.init.covariance()) < 1e-10);
        prop_assert!((up.mean() - p.init.mean()).abs().max() < 1e-10 * p.init.mean().abs().max().max(1.0));
        let split = precision_split(&p.init, &p.map, &predicted).unwrap();
        prop_assert!(split.low_rank_factor.abs().max() < 1e-6);
    }

    #[test]
    fn population_prior_never_loses_precision(seed in any::<u64>(), n in 2usize..=5, k in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = 1 + (seed as usize) % n;
        let p = random_dci(&mut rng, n, m);
        let k = k.min(n);
        let b = loop {
            if let Ok(b) = popinfer_core::LinearMap::new(random_matrix(&mut rng, k, n)) {
                break b;
            }
        };
        let noise = random_spd(&mut rng, k);
        let y: Vec<f64> = (0..k).map(|i| i as f64 * 0.3 - 0.2).collect();
        let problem = LinearGaussianProblem::new(p.init.clone(), b, noise, y).unwrap();
        let std = standard_posterior(&problem).unwrap();
        let pop = population_informed_posterior(&problem, &p.map, &p.observed).unwrap();
        let (s, q) = (std.precision_summaries(), pop.precision_summaries());
        prop_assert!(q.det_of_inverse >= s.det_of_inverse * (1.0 - 1e-9));
        prop_assert!(q.trace_of_inverse >= s.trace_of_inverse * (1.0 - 1e-9));
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_identity(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = GaussianDensity::new(DVector::from_fn(n, |i, _| i as f64), random_spd(&mut rng, n)).unwrap();
        let b = GaussianDensity::new(DVector::zeros(n), random_spd(&mut rng, n)).unwrap();
        prop_assert!(kl_gaussian(&a, &b).unwrap() >= 0.0);
        prop_assert!(kl_gaussian(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn posterior_covariance_ignores_data(y1 in -5.0f64..5.0, y2 in -5.0f64..5.0) {
        let a = standard_posterior(&problem(y1)).unwrap();
        let b = standard_posterior(&problem(y2)).unwrap();
        prop_assert_eq!(a.covariance(), b.covariance());
    }
}
