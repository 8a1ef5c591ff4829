use polymer_ldp_core::numeric::log_grid;
use polymer_ldp_core::rate::{
    chernoff_log_bound, growth_probe, log_slope_probe, predicted_rate_curve, sandwich_check, sandwich_grid,
    solve_level, threshold_integral, threshold_sum,
};
use polymer_ldp_core::{classify_regime, rate_functional, ClassifyOptions, RateProfile, Regime, TailModel, TailSpec};
use proptest::prelude::*;

fn power(alpha: f64, dim: usize) -> TailModel {
    TailModel::new(TailSpec::Power { alpha, x_bar: 1.0, dim }).unwrap()
}

fn log_corrected(beta: f64, dim: usize) -> TailModel {
    TailModel::new(TailSpec::LogCorrected { beta, x_bar: 3.0, dim }).unwrap()
}

#[test]
fn functional_matches_closed_forms() {
    let linear = power(1.0, 1);
    for z in log_grid(2.0, 1e6, 10) {
        let exact = z * z.ln();
        let got = rate_functional(&linear, z).unwrap();
        assert!((got - exact).abs() <= 1e-8 * exact, "z={z}: {got} vs {exact}");
    }
    let quadratic = power(2.0, 1);
    for z in log_grid(1.5, 1e8, 10) {
        let exact = z - z.sqrt();
        let got = rate_functional(&quadratic, z).unwrap();
        assert!((got - exact).abs() <= 1e-8 * exact, "z={z}: {got} vs {exact}");
    }
    // G = x, d = 2: 2z - 2√z
    let planar = power(1.0, 2);
    for z in log_grid(2.0, 1e8, 5) {
        let exact = 2.0 * z - 2.0 * z.sqrt();
        assert!((rate_functional(&planar, z).unwrap() - exact).abs() <= 1e-8 * exact);
    }
}

#[test]
fn threshold_integral_closed_form() {
    // G = x^{1/2}, d = 1: η ∫_{η²/M²}^{η²} x^{-1/2} dx = 2η²(1 - 1/M)
    let m = power(0.5, 1);
    for (eta, mm) in [(10.0, 3usize), (1e3, 17), (1e6, 1000)] {
        let exact = 2.0 * eta * eta * (1.0 - 1.0 / mm as f64);
        let got = threshold_integral(&m, eta, mm).unwrap();
        assert!((got - exact).abs() <= 1e-10 * exact, "eta={eta} M={mm}");
    }
}

#[test]
fn sandwich_holds_on_grid() {
    for dim in [1, 2] {
        for alpha in [0.5, 1.0, 2.0] {
            let model = power(alpha, dim);
            let profile = RateProfile::new(&model, 1e6).unwrap();
            let mut count = 0;
            for (eta, m) in sandwich_grid(dim, 1e6) {
                let c = sandwich_check(&model, eta, m, profile.c0).unwrap();
                assert!(c.lower_ok, "G=x^{alpha} d={dim} eta={eta} M={m}: {c:?}");
                assert!(c.upper_ok, "G=x^{alpha} d={dim} eta={eta} M={m}: {c:?}");
                count += 1;
            }
            assert!(count > 40);
            if let Some(c0) = profile.c0_analytic {
                for (eta, m) in sandwich_grid(dim, 1e6) {
                    assert!(sandwich_check(&model, eta, m, c0).unwrap().upper_ok);
                }
            }
        }
    }
}

#[test]
fn growth_probe_forms_agree_and_match_closed_forms() {
    let grid = log_grid(10.0, 1e12, 4);
    for alpha in [0.25, 0.5, 0.75] {
        let probe = growth_probe(&power(alpha, 1), &grid).unwrap();
        assert!(probe.max_form_gap < 1e-8);
        assert!(!probe.diverges, "alpha={alpha}");
        for &(y, v) in &probe.points {
            let exact = (1.0 - y.powf(alpha - 1.0)) / (1.0 - alpha);
            assert!((v - exact).abs() <= 1e-8 * exact, "alpha={alpha} y={y}");
        }
    }
    let planar = growth_probe(&power(1.0, 2), &grid).unwrap();
    assert!(!planar.diverges);
    for &(y, v) in &planar.points {
        let exact = 2.0 * (1.0 - y.powf(-0.5));
        assert!((v - exact).abs() <= 1e-8 * exact);
    }
    assert!((planar.estimate.unwrap() - 2.0).abs() < 1e-5);
    for dim in [1, 2] {
        let boundary = growth_probe(&power(dim as f64, dim), &grid).unwrap();
        assert!(boundary.diverges, "G=x^d, d={dim}");
        assert!(boundary.estimate.is_none());
    }
    let transitional = growth_probe(&log_corrected(0.5, 1), &grid).unwrap();
    assert!(transitional.diverges);
    assert!(transitional.max_form_gap < 1e-8);
    assert!(growth_probe(&power(2.0, 1), &grid).is_err());
}

#[test]
fn log_slope_probe_values() {
    let grid = log_grid(10.0, 1e12, 10);
    for (alpha, dim) in [(0.25, 1), (0.5, 1), (0.5, 2), (1.0, 2)] {
        let p = log_slope_probe(&power(alpha, dim), &grid).unwrap();
        assert!((p.estimate - (dim as f64 - alpha)).abs() <= 1e-6, "alpha={alpha} d={dim}");
        assert!(!p.vanishes());
    }
    assert!(log_slope_probe(&power(1.0, 1), &grid).unwrap().estimate.abs() < 1e-6);
    assert!(log_slope_probe(&log_corrected(0.5, 1), &grid).unwrap().vanishes());
    assert!(log_slope_probe(&power(3.0, 1), &grid).is_err());
}

#[test]
fn level_solver() {
    let quadratic = power(2.0, 1);
    let mut prev = 0.0;
    for t in [1.0, 10.0, 100.0, 1e4, 1e6] {
        let eta = solve_level(&quadratic, t, 1.0).unwrap();
        let exact = ((1.0 + (1.0 + 4.0 * t).sqrt()) / 2.0).powi(2);
        assert!((eta - exact).abs() <= 1e-8 * exact, "T={t}: {eta} vs {exact}");
        assert!(eta > prev);
        prev = eta;
    }
    let linear = power(1.0, 1);
    for t in [5.0, 50.0, 5e3] {
        let eta = solve_level(&linear, t, 2.0).unwrap();
        assert!((eta * eta.ln() - 2.0 * t).abs() <= 1e-8 * 2.0 * t);
    }
    for dim in [1, 2] {
        let fast = power(dim as f64 + 1.0, dim);
        let ratios: Vec<f64> = [10.0, 100.0, 1e3, 1e4]
            .iter()
            .map(|&t| solve_level(&fast, t, 1.0).unwrap() / t.powi(dim as i32))
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(lo > 0.0 && hi / lo < 4.0, "d={dim}: {ratios:?}");
    }
}

#[test]
fn classifier_targets() {
    let opts = ClassifyOptions::default();
    let cases = [
        (power(1.0, 1), Regime::BoundedF, "T^2/ln T"),
        (power(1.0, 2), Regime::ComparableToTail, "T^2"),
        (power(0.25, 1), Regime::ComparableToTail, "T^1.25"),
        (power(0.5, 1), Regime::ComparableToTail, "T^1.5"),
        (power(2.0, 1), Regime::FastMaximal, "T^2"),
        (power(3.0, 2), Regime::FastMaximal, "T^3"),
        (power(2.0, 2), Regime::BoundedF, "T^3/ln^2 T"),
        (log_corrected(0.5, 1), Regime::TransitionalSmall, "o(T·G(T))"),
        (TailModel::new(TailSpec::TwoPoint { a: 1.0, p: 0.5, dim: 1 }).unwrap(), Regime::FastMaximal, "T^2"),
    ];
    for (model, regime, label) in cases {
        let v = classify_regime(&model, &opts).unwrap();
        assert_eq!(v.regime, regime, "{:?}", model.spec());
        assert_eq!(v.label, label, "{:?}", model.spec());
        assert!(v.probes_agree, "{:?}", model.spec());
    }
}

#[test]
fn predicted_curves() {
    let opts = ClassifyOptions::default();
    let ts = [10.0, 20.0, 40.0];
    let half = power(0.5, 1);
    let v = classify_regime(&half, &opts).unwrap();
    for (t, r) in predicted_rate_curve(&v, &half, &ts).unwrap() {
        assert!((r - t.powf(1.5)).abs() <= 1e-12 * r);
    }
    let gauss = power(1.0, 1);
    let v = classify_regime(&gauss, &opts).unwrap();
    for (t, r) in predicted_rate_curve(&v, &gauss, &ts).unwrap() {
        assert!((r - t * t / t.ln()).abs() <= 1e-12 * r);
    }
    let planar = power(1.0, 2);
    let v = classify_regime(&planar, &opts).unwrap();
    for (t, r) in predicted_rate_curve(&v, &planar, &ts).unwrap() {
        assert!((r - t * t).abs() <= 1e-12 * r);
    }
}

#[test]
fn chernoff_bound_monotone_in_eps() {
    let m = power(1.0, 1);
    let tilt = 2.0 * m.eta0() * 4.0;
    let mut prev = f64::INFINITY;
    for k in 1..=20 {
        let b = chernoff_log_bound(&m, 10, 4, tilt, 0.1 * k as f64, 0.5).unwrap();
        assert!(b.log_bound <= prev);
        prev = b.log_bound;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn functional_increasing(alpha in 0.2f64..3.0, z in 1.0f64..1e5, step in 1.01f64..3.0) {
        let m = power(alpha, 1);
        prop_assert!(rate_functional(&m, z * step).unwrap() > rate_functional(&m, z).unwrap());
    }

    #[test]
    fn lower_sandwich_any_power(alpha in 0.2f64..3.0, dim in 1usize..=2, eta in 1.0f64..1e5, frac in 0.0f64..1.0) {
        let m = power(alpha, dim);
        let top = eta.powf(1.0 / dim as f64).floor() as usize;
        let mm = 1 + ((top - 1) as f64 * frac) as usize;
        let c = sandwich_check(&m, eta, mm, 0.0).unwrap();
        prop_assert!(c.lower_ok, "{:?}", c);
        if alpha >= dim as f64 {
            prop_assert!(threshold_sum(&m, eta, mm).unwrap() >= c.integral);
        }
    }
}
