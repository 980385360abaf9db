use fbst_core::composition::{
    conjunctive_evalue, convolve_all, disjunctive_evalue, mellin_convolve, Component, CompositeStructure,
};
use fbst_core::model::{make_gaussian_mean_model, Hypothesis, ParameterSpace, StatisticalModel};
use fbst_core::optimizer::{maximize_surprise, OptimizerConfig};
use fbst_core::sampler::{sample_posterior, SamplerConfig};
use fbst_core::truth::{estimate_truth_ladder, sup_distance_with_slack, LadderOrigin, TruthLadder};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn ladder_from(values: &[f64], masses: &[f64]) -> TruthLadder {
    let mut atoms: Vec<(f64, f64)> = values.iter().copied().zip(masses.iter().copied()).collect();
    TruthLadder::from_atoms(&mut atoms, LadderOrigin::Empirical).unwrap()
}

/// All outcomes of the product of independent discrete variables.
fn brute_force_cdf(a: &[(f64, f64)], b: &[(f64, f64)], v: f64) -> f64 {
    let mut p = 0.0;
    for (x, px) in a {
        for (y, py) in b {
            if x * y <= v {
                p += px * py;
            }
        }
    }
    p
}

#[test]
fn single_atoms_multiply() {
    let w = mellin_convolve(&TruthLadder::unit_atom(2f64.ln()), &TruthLadder::unit_atom(3f64.ln()), 16);
    assert_eq!(w.len(), 1);
    assert!((w.support()[0] - 6f64.ln()).abs() < 1e-15);
    assert_eq!(w.masses(), &[1.0]);
}

#[test]
fn two_atom_ladders_match_enumeration() {
    let a = [(1.0, 0.5), (2.0, 0.5)];
    let b = [(3.0, 0.5), (4.0, 0.5)];
    let la = ladder_from(&[0.0, 2f64.ln()], &[0.5, 0.5]);
    let lb = ladder_from(&[3f64.ln(), 4f64.ln()], &[0.5, 0.5]);
    let w = mellin_convolve(&la, &lb, 64);
    for v in [2.9, 3.0, 3.5, 4.0, 5.0, 6.0, 7.9, 8.0, 9.0] {
        assert_eq!(w.eval(f64::ln(v)), brute_force_cdf(&a, &b, v + 1e-12), "v = {v}");
    }
    assert_eq!(w.eval(5f64.ln()), 0.5);
}

#[test]
fn random_small_ladders_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let gen = |rng: &mut ChaCha8Rng| -> Vec<(f64, f64)> {
            let n = rng.random_range(1..6);
            let raw: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(1..20) as f64 / 4.0, rng.random::<f64>() + 0.1)).collect();
            let total: f64 = raw.iter().map(|p| p.1).sum();
            raw.into_iter().map(|(v, m)| (v, m / total)).collect()
        };
        let (a, b) = (gen(&mut rng), gen(&mut rng));
        let to_ladder = |x: &[(f64, f64)]| {
            let v: Vec<f64> = x.iter().map(|p| p.0.ln()).collect();
            let m: Vec<f64> = x.iter().map(|p| p.1).collect();
            ladder_from(&v, &m)
        };
        let w = mellin_convolve(&to_ladder(&a), &to_ladder(&b), 1 << 10);
        // products are multiples of 1/16, so probing just above each one is unambiguous
        for &(x, _) in &a {
            for &(y, _) in &b {
                let v = x * y * (1.0 + 1e-9);
                assert!((w.eval(v.ln()) - brute_force_cdf(&a, &b, v)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn unit_atom_identity() {
    let w = ladder_from(&[-1.0, 0.3, 2.0], &[0.1, 0.6, 0.3]);
    let out = mellin_convolve(&w, &TruthLadder::unit_atom(0.0), 64);
    assert_eq!(out.support(), w.support());
    assert_eq!(out.masses(), w.masses());
}

fn component_from(model: &StatisticalModel, seed: u64) -> (TruthLadder, f64) {
    let s = sample_posterior(model, &SamplerConfig::default().with_seed(seed)).unwrap();
    let ladder = estimate_truth_ladder(&s, 2048).unwrap();
    let top = maximize_surprise(model, &Hypothesis::whole(model.dim()), Some(&s), &OptimizerConfig::default())
        .unwrap()
        .log_s_star;
    (ladder, top)
}

#[test]
fn two_gaussians_match_the_joint_model() {
    let m = make_gaussian_mean_model(1.0, 1.0).unwrap();
    let h = Hypothesis::coordinate_equals(1, 0, 0.0);
    let s_star = maximize_surprise(&m, &h, None, &OptimizerConfig::default()).unwrap().log_s_star;
    let (l1, top1) = component_from(&m, 1);
    let (l2, top2) = component_from(&m, 2);
    let comps = vec![
        Component { name: "a".into(), ladder: l1, log_s_max: Some(top1) },
        Component { name: "b".into(), ladder: l2, log_s_max: Some(top2) },
    ];
    let c = CompositeStructure::new(comps, vec![vec![Some(s_star), Some(s_star)]], 2048).unwrap();
    let composed = conjunctive_evalue(&c, 0).unwrap();

    // direct evaluation on the 2-D product model
    let space = ParameterSpace::unbounded(vec!["a".into(), "b".into()]).unwrap();
    let joint = StatisticalModel::with_flat_reference(
        space.clone(),
        Arc::new(|t: &[f64]| -0.5 * ((t[0] - 1.0).powi(2) + (t[1] - 1.0).powi(2))),
    );
    let js = sample_posterior(&joint, &SamplerConfig::default().with_seed(3)).unwrap();
    let jh = Hypothesis::parse(&space, &[], &["a = 0", "b = 0"]).unwrap();
    let direct = fbst_core::evalue(&joint, &jh, &js, 2048, &OptimizerConfig::default()).unwrap().ev;

    assert!((composed - direct).abs() < 0.02, "{composed} vs {direct}");
    // the product surprise exceeds e^{-1}·max iff the chi-square(2) statistic is below 2
    assert!((composed - (-1f64).exp()).abs() < 0.02);
    assert_eq!(disjunctive_evalue(&c).unwrap(), composed);
}

#[test]
fn extreme_components() {
    let w1 = ladder_from(&[-3.0, -1.0, 0.0], &[0.2, 0.3, 0.5]);
    let w2 = ladder_from(&[-2.0, 1.0], &[0.6, 0.4]);
    let comps = vec![
        Component { name: "a".into(), ladder: w1.clone(), log_s_max: Some(0.0) },
        Component { name: "b".into(), ladder: w2.clone(), log_s_max: Some(1.0) },
    ];
    let all_max = CompositeStructure::new(comps.clone(), vec![vec![Some(0.0), Some(1.0)]], 64).unwrap();
    assert_eq!(conjunctive_evalue(&all_max, 0).unwrap(), 1.0);
    let one_zero = CompositeStructure::new(comps, vec![vec![Some(f64::NEG_INFINITY), Some(1.0)]], 64).unwrap();
    assert_eq!(conjunctive_evalue(&one_zero, 0).unwrap(), 0.0);
}

#[test]
fn disjunction_reduces_and_is_idempotent() {
    let w = ladder_from(&[-3.0, -1.0, 0.0], &[0.2, 0.3, 0.5]);
    let comps = vec![
        Component { name: "a".into(), ladder: w.clone(), log_s_max: Some(0.0) },
        Component { name: "b".into(), ladder: w, log_s_max: Some(0.0) },
    ];
    let row = vec![Some(-1.0), Some(-0.5)];
    let single = CompositeStructure::new(comps.clone(), vec![row.clone()], 64).unwrap();
    let doubled = CompositeStructure::new(comps, vec![row.clone(), row], 64).unwrap();
    assert_eq!(disjunctive_evalue(&single).unwrap(), conjunctive_evalue(&single, 0).unwrap());
    assert_eq!(disjunctive_evalue(&doubled).unwrap(), disjunctive_evalue(&single).unwrap());
}

/// Classical evaluation of a DNF over truth values.
fn dnf(grid: &[Vec<bool>]) -> bool {
    grid.iter().any(|row| row.iter().all(|v| *v))
}

#[test]
fn boolean_networks_follow_classical_logic() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let comps: Vec<Component> = (0..3)
            .map(|j| {
                let n = rng.random_range(2..8);
                let vals: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
                let masses: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
                let ladder = ladder_from(&vals, &masses);
                Component { name: format!("c{j}"), log_s_max: Some(ladder.max_support()), ladder }
            })
            .collect();
        let truth: Vec<Vec<bool>> = (0..3).map(|_| (0..3).map(|_| rng.random::<bool>()).collect()).collect();
        // ev = 1 at the top of a component's support, ev = 0 below all of it
        let grid: Vec<Vec<Option<f64>>> = truth
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&comps)
                    .map(|(t, c)| Some(if *t { c.ladder.max_support() } else { f64::NEG_INFINITY }))
                    .collect()
            })
            .collect();
        let cs = CompositeStructure::new(comps, grid, 256).unwrap();
        let ev = disjunctive_evalue(&cs).unwrap();
        assert_eq!(ev, if dnf(&truth) { 1.0 } else { 0.0 });
    }
}

fn arb_ladder() -> impl Strategy<Value = TruthLadder> {
    prop::collection::vec((-10.0f64..10.0, 0.01f64..1.0), 1..40).prop_map(|mut atoms| {
        TruthLadder::from_atoms(&mut atoms, LadderOrigin::Empirical).unwrap()
    })
}

proptest! {
    #[test]
    fn convolution_mass_and_support(a in arb_ladder(), b in arb_ladder()) {
        let w = mellin_convolve(&a, &b, 64);
        prop_assert_eq!(*w.masses().last().unwrap(), 1.0);
        prop_assert!(w.len() <= 64);
        prop_assert!(w.min_support() >= a.min_support() + b.min_support() - 1e-9);
        prop_assert!(w.max_support() <= a.max_support() + b.max_support() + 1e-9);
    }

    #[test]
    fn convolution_order_independence(ls in prop::collection::vec(arb_ladder(), 2..5), seed in any::<u64>()) {
        let n_max = 128;
        let mut shuffled = ls.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            let j = rng.random_range(0..=i);
            shuffled.swap(i, j);
        }
        let a = convolve_all(&ls, n_max).unwrap();
        let b = convolve_all(&shuffled, n_max).unwrap();
        let k = ls.len() as f64;
        prop_assert!(sup_distance_with_slack(&a, &b, 1e-12) <= (k - 1.0) * 2.0 / n_max as f64 + 1e-12);
    }

    #[test]
    fn commutative_up_to_condensation(a in arb_ladder(), b in arb_ladder()) {
        let ab = mellin_convolve(&a, &b, 32);
        let ba = mellin_convolve(&b, &a, 32);
        prop_assert!(sup_distance_with_slack(&ab, &ba, 1e-12) <= 2.0 / 32.0);
    }
}
