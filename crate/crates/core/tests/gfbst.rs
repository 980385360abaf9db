use fbst_core::gfbst::{
    check_logical_properties, gfbst_decide, modal_table, region_estimator_decide, CellSet, DecisionValue, GridModel,
    TestRule, CONDITIONS,
};
use fbst_core::model::{polynomial_regression, Hypothesis, SigmaScale};
use fbst_core::modelsel::{SAKAMOTO_X, SAKAMOTO_Y};
use fbst_core::optimizer::{maximize_surprise, OptimizerConfig};
use fbst_core::sampler::{sample_posterior, SamplerConfig};
use fbst_core::truth::estimate_truth_ladder;

#[test]
fn gfbst_is_coherent_on_random_grids() {
    for seed in [1, 2, 3] {
        let grid = GridModel::random(20, 20, seed);
        for c in [0.05, 0.2, 0.5] {
            let r = check_logical_properties(&grid, 1000, c, seed, TestRule::Gfbst).unwrap();
            assert_eq!(r.total(), 0, "seed {seed}, c {c}: {:?}", r.counts);
            assert_eq!(r.region_mismatches, 0);
            assert_eq!(r.counts.len(), CONDITIONS.len());
        }
    }
}

#[test]
fn broken_rule_violates_invertibility() {
    let grid = GridModel::random(20, 20, 7);
    let r = check_logical_properties(&grid, 1000, 0.05, 7, TestRule::BrokenNegativeControl).unwrap();
    assert!(r.invertibility() >= 1, "{:?}", r.counts);
    assert!(!r.examples.is_empty());
}

#[test]
fn broken_rule_violation_exists_on_a_tiny_grid() {
    // exhaustive search over all subsets of a 2x2 grid
    let grid = GridModel::new(2, 2, vec![0.4, 0.3, 0.2, 0.1], vec![1.0; 4]).unwrap();
    let c = 0.05;
    let mut found = false;
    for bits in 0u32..16 {
        let h = CellSet::from_cells(4, (0..4).filter(|i| bits >> i & 1 == 1));
        let d = TestRule::BrokenNegativeControl.decide(&grid, &h, c);
        let db = TestRule::BrokenNegativeControl.decide(&grid, &h.complement(), c);
        if (d == DecisionValue::Accept) != (db == DecisionValue::Reject) {
            found = true;
        }
        let g = TestRule::Gfbst.decide(&grid, &h, c);
        let gb = TestRule::Gfbst.decide(&grid, &h.complement(), c);
        assert_eq!(g == DecisionValue::Accept, gb == DecisionValue::Reject);
    }
    assert!(found);
}

#[test]
fn zero_trials_give_an_empty_report() {
    let grid = GridModel::random(4, 4, 0);
    let r = check_logical_properties(&grid, 0, 0.05, 0, TestRule::Gfbst).unwrap();
    assert_eq!(r.total(), 0);
    assert!(r.examples.is_empty());
}

#[test]
fn complement_pairs_invert() {
    let grid = GridModel::random(10, 10, 5);
    for i in 0..100 {
        let h = CellSet::from_cells(100, (0..100).filter(|c| (c * 7 + i) % 5 < 2 + i % 3));
        let d = TestRule::Gfbst.decide(&grid, &h, 0.1);
        let db = TestRule::Gfbst.decide(&grid, &h.complement(), 0.1);
        assert_eq!(d == DecisionValue::Accept, db == DecisionValue::Reject);
    }
}

#[test]
fn decision_is_a_monotone_step_function() {
    let c = 0.05;
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let decide = |a: f64, b: f64| gfbst_decide(a, b, c).ok().map(|d| d.value);
    for (i, &a) in grid.iter().enumerate() {
        for (j, &b) in grid.iter().enumerate() {
            let Some(d) = decide(a, b) else {
                assert!(a < c && b < c);
                continue;
            };
            if i + 1 < grid.len() {
                if let Some(up) = decide(grid[i + 1], b) {
                    assert!(up >= d, "ev(H) {a} -> {}", grid[i + 1]);
                }
            }
            if j + 1 < grid.len() {
                if let Some(up) = decide(a, grid[j + 1]) {
                    assert!(up <= d, "ev(not H) {b} -> {}", grid[j + 1]);
                }
            }
        }
    }
}

#[test]
fn hexagon_relations() {
    for v in [DecisionValue::Reject, DecisionValue::Agnostic, DecisionValue::Accept] {
        let m = modal_table(v);
        assert_ne!(m.necessary, m.unnecessary);
        assert_ne!(m.possible, m.impossible);
        assert_ne!(m.contingent, m.determined);
        assert!(!(m.necessary && m.impossible));
        assert!(m.possible || m.unnecessary);
        assert_eq!(m.determined, m.necessary || m.impossible);
        assert!(m.is_consistent());
    }
    let acc = modal_table(DecisionValue::Accept);
    assert!(acc.necessary && acc.possible && !acc.contingent && acc.determined);
    let rej = modal_table(DecisionValue::Reject);
    assert!(rej.impossible && rej.determined);
    let agn = modal_table(DecisionValue::Agnostic);
    assert!(agn.contingent && agn.possible && agn.unnecessary);
}

#[test]
fn region_test_on_upper_cuts_matches_gfbst() {
    let grid = GridModel::random(8, 8, 21);
    let n = grid.cells();
    let levels = grid.log_surprise();
    let w = grid.truth_at_cells();
    for pivot in 0..n {
        let s = grid.upper_cut(levels[pivot]);
        if s.is_empty() {
            continue;
        }
        // threshold: W at the least surprising cell inside S
        let c = s.iter().min_by(|a, b| levels[*a].total_cmp(&levels[*b])).map(|cell| w[cell]).unwrap();
        if c >= 1.0 {
            continue;
        }
        for bits in 0..200usize {
            let h = CellSet::from_cells(n, (0..n).filter(|c| (c * 31 + bits * 17) % 11 < bits % 7));
            let region = region_estimator_decide(&s, &h).unwrap();
            let g = gfbst_decide(grid.ev(&h), grid.ev(&h.complement()), c).unwrap().value;
            assert_eq!(region, g);
        }
    }
}

#[test]
fn sharp_hypotheses_are_never_accepted() {
    for k in 0..=5 {
        let m = polynomial_regression(&SAKAMOTO_X, &SAKAMOTO_Y, k, SigmaScale::LogSigma).unwrap();
        let s = sample_posterior(&m, &SamplerConfig::default().with_total_draws(40_000).with_seed(k as u64)).unwrap();
        let ladder = estimate_truth_ladder(&s, 512).unwrap();
        let cfg = OptimizerConfig::default();
        for j in 0..=k {
            let h = Hypothesis::coordinate_equals(m.dim(), j, 0.0);
            let ev = ladder.eval(maximize_surprise(&m, &h, Some(&s), &cfg).unwrap().log_s_star);
            let ev_bar = ladder.eval(maximize_surprise(&m, &h.complement(), Some(&s), &cfg).unwrap().log_s_star);
            assert_eq!(ev_bar, 1.0, "order {k}, coefficient {j}");
            for c in [0.01, 0.05, 0.5, 0.99] {
                assert_ne!(gfbst_decide(ev, ev_bar, c).unwrap().value, DecisionValue::Accept);
            }
        }
    }
}
