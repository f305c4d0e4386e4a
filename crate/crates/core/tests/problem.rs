mod common;

use relloc::graph::{build_complete, build_cycle};
use relloc::problem::{derive_seed, ProblemSpec};

const TRIALS: usize = 100_000;

#[test]
fn unit_prior_moments() {
    let x0 = vec![0.5, -1.0, 2.0, 0.0, 3.5];
    let spec = ProblemSpec::new(build_cycle(5).unwrap(), x0.clone(), 1.0, 1.0).unwrap();
    let (mean, var) = spec.empirical_moments(TRIALS, 17).unwrap();
    // 3σ/√R = 0.0095 < 0.02 for the mean; √(2/R) ≈ 0.0045 for the variance.
    for i in 0..5 {
        assert!((mean[i] - x0[i]).abs() < 0.02, "mean[{i}] = {}", mean[i]);
        assert!((0.97..=1.03).contains(&var[i]), "var[{i}] = {}", var[i]);
    }
}

#[test]
fn wide_prior_variance() {
    let spec = ProblemSpec::with_zero_prior(build_complete(3).unwrap(), 20.0, 1.0).unwrap();
    let (_, var) = spec.empirical_moments(TRIALS, 3).unwrap();
    for v in var {
        assert!((v / 400.0 - 1.0).abs() < 0.03, "variance {v}");
    }
}

#[test]
fn standardized_draws_within_four_standard_errors() {
    let spec = ProblemSpec::with_zero_prior(build_complete(2).unwrap(), 1.0, 1.0).unwrap();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0.0;
    let mut noise_sum = 0.0;
    let mut noise_sq = 0.0;
    let mut cross = [0.0f64; 2];
    for r in 0..TRIALS {
        let real = spec.sample_realization(derive_seed(99, r as u64));
        for &x in &real.x_bar {
            sum += x;
            sum_sq += x * x;
            count += 1.0;
        }
        let n = real.noise[0];
        noise_sum += n;
        noise_sq += n * n;
        cross[0] += real.x_bar[0] * n;
        cross[1] += real.x_bar[1] * n;
    }
    let r = TRIALS as f64;
    let mean = sum / count;
    let var = sum_sq / count - mean * mean;
    assert!(mean.abs() < 4.0 / count.sqrt(), "prior mean {mean}");
    assert!((var - 1.0).abs() < 4.0 * (2.0 / count).sqrt(), "prior variance {var}");
    let nm = noise_sum / r;
    let nv = noise_sq / r - nm * nm;
    assert!(nm.abs() < 4.0 / r.sqrt(), "noise mean {nm}");
    assert!((nv - 1.0).abs() < 4.0 * (2.0 / r).sqrt(), "noise variance {nv}");
    // Product of independent unit normals has unit variance.
    for c in cross {
        assert!((c / r).abs() < 4.0 / r.sqrt(), "cross covariance {}", c / r);
    }
}

#[test]
fn noise_is_exactly_measurement_residual() {
    let spec = ProblemSpec::with_zero_prior(build_cycle(30).unwrap(), 7.0, 0.3).unwrap();
    for seed in 0..50 {
        let r = spec.sample_realization(seed);
        let ax = spec.graph().apply_incidence(&r.x_bar);
        for e in 0..r.b.len() {
            assert_eq!(r.b[e] - ax[e], r.noise[e]);
        }
    }
}
