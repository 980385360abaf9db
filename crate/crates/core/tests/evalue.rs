use fbst_core::evalue::{chi2_cdf, chi2_quantile, evalue, standardize, standardized_evalue, EvidenceReport};
use fbst_core::model::{gaussian_mean_oracle_ev, make_gaussian_mean_model, polynomial_regression, Hypothesis, SigmaScale};
use fbst_core::modelsel::{SAKAMOTO_X, SAKAMOTO_Y};
use fbst_core::optimizer::OptimizerConfig;
use fbst_core::sampler::{sample_posterior, SamplerConfig, SurpriseSample};
use fbst_core::truth::{estimate_truth_ladder, DEFAULT_N_MAX};
use proptest::prelude::*;

/// Composite Simpson rule, used as an independent oracle for χ² integrals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn whole_space_has_ev_one() {
    let m = make_gaussian_mean_model(1.0, 1.0).unwrap();
    let s = sample_posterior(&m, &SamplerConfig::default().with_total_draws(20_000)).unwrap();
    let r = evalue(&m, &Hypothesis::whole(1), &s, DEFAULT_N_MAX, &OptimizerConfig::default()).unwrap();
    assert_eq!(r.ev, 1.0);
    assert_eq!(r.ev + r.ev_bar, 1.0);
    assert_eq!(r.sev, Some(1.0));
    assert!(r.unstandardized);
}

#[test]
fn gaussian_point_null() {
    let m = make_gaussian_mean_model(1.0, 1.0).unwrap();
    let s = sample_posterior(&m, &SamplerConfig::default().with_seed(5)).unwrap();
    let r = evalue(&m, &Hypothesis::coordinate_equals(1, 0, 0.0), &s, DEFAULT_N_MAX, &OptimizerConfig::default()).unwrap();
    // oracle 2(1 − Φ(1)) by quadrature of the standard normal density
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let oracle = 2.0 * (0.5 - simpson(phi, 0.0, 1.0, 2000));
    assert!((oracle - 0.3173).abs() < 1e-4);
    assert!((oracle - gaussian_mean_oracle_ev(1.0, 1.0, 0.0)).abs() < 1e-10);
    assert!((r.ev - oracle).abs() < 0.01, "{}", r.ev);
    assert_eq!(r.t, 1);
    assert_eq!(r.hdim, 0);
    assert!(r.diagnostics.ess.unwrap() > 1000.0);
    assert_eq!(r.provenance.seed, Some(5));
}

#[test]
fn regression_order_two() {
    let m = polynomial_regression(&SAKAMOTO_X, &SAKAMOTO_Y, 2, SigmaScale::LogSigma).unwrap();
    let s = sample_posterior(&m, &SamplerConfig::default().with_seed(3)).unwrap();
    let r = evalue(&m, &Hypothesis::coordinate_equals(4, 2, 0.0), &s, DEFAULT_N_MAX, &OptimizerConfig::default()).unwrap();
    assert!((r.ev - 0.013).abs() < 0.05, "{}", r.ev);
    assert_eq!((r.t, r.hdim), (4, 3));
}

#[test]
fn chi2_examples() {
    for d in 1..=6 {
        assert_eq!(chi2_cdf(d, 0.0), 0.0);
        assert_eq!(chi2_cdf(d, f64::INFINITY), 1.0);
        assert_eq!(chi2_quantile(d, 0.0), 0.0);
        assert_eq!(chi2_quantile(d, 1.0), f64::INFINITY);
    }
    assert!((chi2_cdf(2, 2.0 * 2f64.ln()) - 0.5).abs() < 1e-15);
    assert!((chi2_quantile(2, 0.5) - 2.0 * 2f64.ln()).abs() < 1e-12);
    // χ²₁ density integrated by parts in u = √z to avoid the singularity
    let dens = |u: f64| 2.0 * (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let oracle = simpson(dens, 0.0, 3.8415f64.sqrt(), 4000);
    assert!((chi2_cdf(1, 3.8415) - oracle).abs() < 1e-9);
    assert!((chi2_cdf(1, 3.8415) - 0.95).abs() < 1e-4);
}

#[test]
fn quantile_round_trips() {
    for d in 1..=10 {
        for c in [0.001, 0.5, 0.999] {
            let z = chi2_quantile(d, c);
            assert!((chi2_cdf(d, z) - c).abs() < 1e-10, "d = {d}, c = {c}");
        }
    }
}

#[test]
fn standardization_examples() {
    assert_eq!(standardize(4, 2, 0.0), 0.0);
    assert_eq!(standardize(4, 2, 1.0), 1.0);
    assert!((standardize(2, 1, 0.5) - 0.7611).abs() < 1e-3);
    assert_eq!(standardize(5, 5, 0.123), 0.123);
}

#[test]
fn standardized_evalue_consistency() {
    let ladder = fbst_core::TruthLadder::unit_atom(0.0);
    let mut r = EvidenceReport::from_ladder(&ladder, 0.0, 6, 3);
    r.ev = 0.8;
    r.ev_bar = 0.2;
    let r = standardized_evalue(r);
    assert_eq!(r.sev_bar, Some(standardize(6, 3, 0.2)));
    assert_eq!(r.sev.unwrap() + r.sev_bar.unwrap(), 1.0);
}

proptest! {
    #[test]
    fn standardize_is_monotone(t in 1usize..12, h in 0usize..12, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let h = h.min(t);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(standardize(t, h, lo) <= standardize(t, h, hi));
    }

    #[test]
    fn ev_ignores_additive_constants(values in prop::collection::vec(-50.0f64..50.0, 600..900), shift in -1e3f64..1e3, pick in 0usize..600) {
        let s = SurpriseSample::from_log_surprise(values.clone());
        let shifted = SurpriseSample::from_log_surprise(values.iter().map(|v| v + shift).collect());
        let a = estimate_truth_ladder(&s, 512).unwrap();
        let b = estimate_truth_ladder(&shifted, 512).unwrap();
        let level = values[pick];
        prop_assert_eq!(a.eval(level), b.eval(level + shift));
    }
}
