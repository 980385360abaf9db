use fbst_core::model::{make_gaussian_mean_model, polynomial_regression, SigmaScale};
use fbst_core::modelsel::{SAKAMOTO_X, SAKAMOTO_Y};
use fbst_core::sampler::{effective_sample_size, sample_posterior, SamplerConfig, SurpriseSample};
use fbst_core::truth::{condense, empirical_ladder, estimate_truth_ladder, eval_truth, sup_distance, LadderOrigin, TruthLadder};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn iid_series_has_full_ess() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let values: Vec<f64> = (0..20_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let ess = effective_sample_size(&SurpriseSample::from_log_surprise(values)).unwrap();
    let ratio = ess / 20_000.0;
    assert!((0.8..=1.2).contains(&ratio), "{ratio}");
}

#[test]
fn sampling_is_reproducible_per_seed() {
    let m = polynomial_regression(&SAKAMOTO_X, &SAKAMOTO_Y, 2, SigmaScale::LogSigma).unwrap();
    let cfg = SamplerConfig::default().with_total_draws(8_000).with_seed(42);
    let a = sample_posterior(&m, &cfg).unwrap();
    let b = sample_posterior(&m, &cfg).unwrap();
    assert_eq!(a.draws(), b.draws());
    assert_eq!(a.log_surprise(), b.log_surprise());
    let c = sample_posterior(&m, &cfg.clone().with_seed(43)).unwrap();
    assert_ne!(a.draws(), c.draws());
}

#[test]
fn sampled_ladder_matches_the_gaussian_truth_function() {
    // s = exp(-z²/2) with z ~ N(0,1), so W(v) = P(z² ≥ -2 log v) = erfc(√(-log v))
    let m = make_gaussian_mean_model(0.0, 1.0).unwrap();
    let s = sample_posterior(&m, &SamplerConfig::default().with_seed(6)).unwrap();
    let w = estimate_truth_ladder(&s, 1024).unwrap();
    for z in [0.25f64, 0.5, 1.0, 1.5, 2.0, 3.0] {
        let log_v = -z * z / 2.0;
        let tail = 2.0 * (1.0 - normal_cdf_by_quadrature(z));
        assert!((w.eval(log_v) - tail).abs() < 0.01, "z = {z}");
    }
}

/// Φ(z) by Simpson integration of the density from 0.
fn normal_cdf_by_quadrature(z: f64) -> f64 {
    let n = 2000;
    let h = z / n as f64;
    let f = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(0.0) + f(z);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + s * h / 3.0
}

#[test]
fn uniform_ladder_condenses_within_bound() {
    let log_v: Vec<f64> = (0..1024).map(|i| i as f64 / 100.0).collect();
    let w: Vec<f64> = (1..=1024).map(|i| i as f64 / 1024.0).collect();
    let full = TruthLadder::new(log_v, w, LadderOrigin::Empirical).unwrap();
    let small = condense(&full, 512);
    assert!(small.len() <= 512);
    assert!(sup_distance(&full, &small) <= 1.0 / 512.0 + 1e-15);
}

#[test]
fn boundary_queries() {
    let s = SurpriseSample::from_log_surprise((1..=4).map(|v| f64::ln(v as f64)).collect());
    let w = empirical_ladder(&s).unwrap();
    assert_eq!(eval_truth(&w, 2.5f64.ln()), 0.5);
    assert_eq!(eval_truth(&w, -10.0), 0.0);
    assert_eq!(eval_truth(&w, 4f64.ln()), 1.0);
    assert_eq!(eval_truth(&w, f64::NEG_INFINITY), 0.0);
    assert_eq!(eval_truth(&w, f64::INFINITY), 1.0);
    let two = condense(&TruthLadder::from_atoms(&mut [(0.0, 0.5), (1.0, 0.5)], LadderOrigin::Empirical).unwrap(), 2);
    assert_eq!(two.support(), &[0.0, 1.0]);
}

proptest! {
    #[test]
    fn condensation_respects_its_contract(
        values in prop::collection::vec(-50.0f64..50.0, 1..3000),
        n_max in 2usize..600,
    ) {
        let s = SurpriseSample::from_log_surprise(values);
        let full = empirical_ladder(&s).unwrap();
        let small = condense(&full, n_max);
        prop_assert!(small.len() <= n_max);
        prop_assert!(sup_distance(&full, &small) <= 1.0 / n_max as f64 + 1e-12);
        prop_assert_eq!(*small.masses().last().unwrap(), 1.0);
        prop_assert_eq!(small.max_support(), full.max_support());
        for pair in small.masses().windows(2) {
            prop_assert!(pair[0] < pair[1]);
        }
        // condensing never overstates the truth value
        for &v in full.support() {
            prop_assert!(small.eval(v) <= full.eval(v));
        }
    }

    #[test]
    fn ladders_are_monotone_cdfs(values in prop::collection::vec(-20.0f64..20.0, 1..500), a in -25.0f64..25.0, b in -25.0f64..25.0) {
        let w = empirical_ladder(&SurpriseSample::from_log_surprise(values)).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(w.eval(lo) <= w.eval(hi));
        prop_assert!((0.0..=1.0).contains(&w.eval(lo)));
    }
}
