use fbst_core::modelsel::{
    aic, empirical_error, generate_dataset, penalty_factor, plot_data, select_order, selection_table,
    write_table_csv, Criterion, FbstSettings, Selector, SAKAMOTO_X, SAKAMOTO_Y,
};
use fbst_core::sampler::SamplerConfig;
use fbst_core::FbstError;
use proptest::prelude::*;

/// Published R_EMP, R_FPE, R_SBC, R_GCV, R_SMS for orders 0–5.
const PUBLISHED_ERRORS: [[f64; 5]; 6] = [
    [0.03712, 0.04494, 0.04307, 0.04535, 0.04419],
    [0.02223, 0.02964, 0.02787, 0.03025, 0.02858],
    [0.01130, 0.01661, 0.01534, 0.01724, 0.01560],
    [0.01129, 0.01835, 0.01667, 0.01946, 0.01667],
    [0.01088, 0.01959, 0.01751, 0.02133, 0.01710],
    [0.01087, 0.02173, 0.01913, 0.02445, 0.01811],
];

#[test]
fn deterministic_columns_reproduce_the_table() {
    let rows = selection_table(&SAKAMOTO_X, &SAKAMOTO_Y, 5, None).unwrap();
    for (row, want) in rows.iter().zip(PUBLISHED_ERRORS) {
        let got = [row.r_emp, row.r_fpe, row.r_sbc, row.r_gcv, row.r_sms];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 1e-4, "order {}: {g} vs {w}", row.order);
        }
        assert_eq!(row.d, row.order + 2);
        assert!(row.ev.is_none());
    }
}

#[test]
fn empirical_error_examples() {
    assert!((empirical_error(&SAKAMOTO_X, &SAKAMOTO_Y, 0).unwrap() - 0.03712).abs() < 1e-4);
    assert!((empirical_error(&SAKAMOTO_X, &SAKAMOTO_Y, 2).unwrap() - 0.01130).abs() < 1e-4);
    let x: Vec<f64> = (0..10).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
    assert!(empirical_error(&x, &y, 1).unwrap() < 1e-25);
}

#[test]
fn penalty_examples() {
    let r0 = 0.03712;
    assert!((penalty_factor(Criterion::Fpe, 2, 21).unwrap() - 1.2105).abs() < 1e-4);
    assert!((penalty_factor(Criterion::Fpe, 2, 21).unwrap() * r0 - 0.04494).abs() < 1e-4);
    assert!((penalty_factor(Criterion::Sbc, 2, 21).unwrap() * r0 - 0.04307).abs() < 1e-4);
    assert!((penalty_factor(Criterion::Sms, 1, 10_000_000).unwrap() - 1.0).abs() < 1e-6);
    assert!(matches!("xyz".parse::<Criterion>(), Err(FbstError::UnknownCriterion(_))));
}

#[test]
fn criteria_pick_order_two() {
    for (c, minimum) in [
        (Criterion::Sbc, 0.01534),
        (Criterion::Gcv, 0.01724),
        (Criterion::Fpe, 0.01661),
        (Criterion::Sms, 0.01560),
    ] {
        let r = select_order(&SAKAMOTO_X, &SAKAMOTO_Y, 5, Selector::Criterion { criterion: c }, None).unwrap();
        assert_eq!(r.selected_order, 2, "{c}");
        assert!((r.rows[2].penalized(c) - minimum).abs() < 1e-4);
    }
    let r = select_order(&SAKAMOTO_X, &SAKAMOTO_Y, 0, Selector::Criterion { criterion: Criterion::Sbc }, None).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.selected_order, 0);
}

#[test]
fn fbst_selection_keeps_order_two() {
    let settings = FbstSettings {
        sampler: SamplerConfig::default().with_seed(2024),
        ..Default::default()
    };
    let r = select_order(&SAKAMOTO_X, &SAKAMOTO_Y, 5, Selector::Fbst { threshold: 0.05 }, Some(&settings)).unwrap();
    assert_eq!(r.selected_order, 2);
    let ev3 = r.rows[3].ev.unwrap();
    let ev2 = r.rows[2].ev.unwrap();
    assert!(ev3 >= 0.05 && (ev3 - 0.999).abs() < 0.05);
    assert!(ev2 < 0.05 && (ev2 - 0.013).abs() < 0.05);
    for row in &r.rows {
        let (ev, sev) = (row.ev.unwrap(), row.sev.unwrap());
        assert!((0.0..=1.0).contains(&ev) && (0.0..=1.0).contains(&sev));
    }
    assert!(select_order(&SAKAMOTO_X, &SAKAMOTO_Y, 5, Selector::Fbst { threshold: 0.05 }, None).is_err());
}

#[test]
fn aic_examples() {
    let a0 = aic(&SAKAMOTO_X, &SAKAMOTO_Y, 0).unwrap();
    let n = 21.0;
    let direct = -2.0 * (-(n / 2.0) * (2.0 * std::f64::consts::PI * 0.03712f64).ln() - n / 2.0) + 4.0;
    assert!((a0 - direct).abs() < 0.05);
    assert!((a0 + 5.57).abs() < 0.05);

    let shifted: Vec<f64> = SAKAMOTO_Y.iter().map(|v| v + 10.0).collect();
    let diff = aic(&SAKAMOTO_X, &SAKAMOTO_Y, 2).unwrap() - aic(&SAKAMOTO_X, &SAKAMOTO_Y, 0).unwrap();
    let diff_shifted = aic(&SAKAMOTO_X, &shifted, 2).unwrap() - aic(&SAKAMOTO_X, &shifted, 0).unwrap();
    assert!((diff - diff_shifted).abs() < 1e-8);
}

#[test]
fn aic_grows_with_dimension_at_equal_error() {
    // same error with a larger dimension must score worse
    let x: Vec<f64> = (0..15).map(|i| i as f64 / 14.0).collect();
    let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * v + if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
    let r2 = empirical_error(&x, &y, 2).unwrap();
    let a2 = aic(&x, &y, 2).unwrap();
    let n = 15.0;
    let with_more_params = n * (2.0 * std::f64::consts::PI * r2).ln() + n + 2.0 * 5.0;
    assert!(with_more_params > a2);
}

#[test]
fn csv_and_plot_outputs() {
    let rows = selection_table(&SAKAMOTO_X, &SAKAMOTO_Y, 3, None).unwrap();
    let mut buf = Vec::new();
    write_table_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("order,r_emp,r_fpe"));
    assert_eq!(text.lines().count(), 5);
    let plot = plot_data(&SAKAMOTO_X, &SAKAMOTO_Y, 4, 0).unwrap();
    assert_eq!(plot.len(), 21);
}

#[test]
fn generated_datasets_are_reproducible() {
    let a = generate_dataset(3, 0.1).unwrap();
    let b = generate_dataset(3, 0.1).unwrap();
    assert_eq!(a.column("y").unwrap(), b.column("y").unwrap());
    assert_eq!(a.n(), 21);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn empirical_error_is_non_increasing(seed in any::<u64>()) {
        let d = generate_dataset(seed, 0.1).unwrap();
        let (x, y) = (d.column("x").unwrap(), d.column("y").unwrap());
        let rows = selection_table(&x, &y, 6, None).unwrap();
        for w in rows.windows(2) {
            prop_assert!(w[1].r_emp <= w[0].r_emp * (1.0 + 1e-10));
        }
        for r in &rows {
            for c in Criterion::ALL {
                let f = penalty_factor(c, r.d, 21).unwrap();
                prop_assert!((r.penalized(c) - f * r.r_emp).abs() <= 1e-12);
            }
        }
    }
}
