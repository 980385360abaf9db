use fbst_core::evalue::evalue;
use fbst_core::model::{
    gaussian_mean_oracle_ev, make_gaussian_mean_exp_model, make_gaussian_mean_model, polynomial_regression, Hypothesis,
    SigmaScale,
};
use fbst_core::modelsel::{SAKAMOTO_X, SAKAMOTO_Y};
use fbst_core::optimizer::OptimizerConfig;
use fbst_core::sampler::{sample_posterior, SamplerConfig};

fn cfg(seed: u64) -> SamplerConfig {
    SamplerConfig::default().with_seed(seed)
}

#[test]
fn regression_log_sigma_against_sigma() {
    let opt = OptimizerConfig::default();
    for k in 0..=5 {
        let mut evs = Vec::new();
        for scale in [SigmaScale::LogSigma, SigmaScale::Sigma] {
            let m = polynomial_regression(&SAKAMOTO_X, &SAKAMOTO_Y, k, scale).unwrap();
            let s = sample_posterior(&m, &cfg(k as u64 + 100)).unwrap();
            let h = Hypothesis::coordinate_equals(m.dim(), k, 0.0);
            evs.push(evalue(&m, &h, &s, 512, &opt).unwrap().ev);
        }
        assert!((evs[0] - evs[1]).abs() < 0.02, "order {k}: {evs:?}");
    }
}

#[test]
fn gaussian_mean_under_exp_map() {
    let opt = OptimizerConfig::default();
    for theta_h in [0.0, 0.5, 1.0, 2.0] {
        let m = make_gaussian_mean_model(1.0, 1.0).unwrap();
        let e = make_gaussian_mean_exp_model(1.0, 1.0).unwrap();
        let a = evalue(&m, &Hypothesis::coordinate_equals(1, 0, theta_h), &sample_posterior(&m, &cfg(1)).unwrap(), 512, &opt)
            .unwrap()
            .ev;
        let hb = Hypothesis::coordinate_equals(1, 0, f64::exp(theta_h));
        let b = evalue(&e, &hb, &sample_posterior(&e, &cfg(2)).unwrap(), 512, &opt).unwrap().ev;
        assert!((a - b).abs() < 0.02, "theta_H = {theta_h}: {a} vs {b}");
        assert!((b - gaussian_mean_oracle_ev(1.0, 1.0, theta_h)).abs() < 0.02);
    }
}
