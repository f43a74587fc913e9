//! Property and invariant tests across the public API.

use proptest::prelude::*;
use stable_clt::attraction::{make_attracted_law, make_pareto, AttractedLaw, EpsilonSpec};
use stable_clt::bounds::{bound_main, rate_exponent, ConstantMode, TERM_SKEW_DRIFT};
use stable_clt::distances::{
    ks_statistic, smooth_wasserstein_lb, smoothed_indicator, wasserstein1_empirical, Target, TestDictionary,
};
use stable_clt::experiment::{fit_rate, Abscissa};
use stable_clt::mc::TermEstimate;
use stable_clt::stable::sample_stable;
use stable_clt::{Error, QuadConfig, SampleBatch, StableParams};

fn q() -> QuadConfig {
    QuadConfig::default()
}

fn batch(values: Vec<f64>) -> SampleBatch {
    SampleBatch::new(values, 0, "test").unwrap()
}

fn logistic(x: f64) -> stable_clt::Result<f64> {
    Ok(1.0 / (1.0 + (-x).exp()))
}

fn sample_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0f64..20.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ks_in_unit_interval_and_order_free(values in sample_vec(1..200), seed in any::<u64>()) {
        let d = ks_statistic(&values, logistic).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&d));
        let mut shuffled = values.clone();
        let mut rng = stable_clt::rng::stream(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        prop_assert_eq!(ks_statistic(&shuffled, logistic).unwrap().value, d);
    }

    #[test]
    fn w1_is_a_metric(
        (a, b, c) in (1usize..60).prop_flat_map(|n| (sample_vec(n..n + 1), sample_vec(n..n + 1), sample_vec(n..n + 1)))
    ) {
        let (a, b, c) = (batch(a), batch(b), batch(c));
        let ab = wasserstein1_empirical(&a, &b).unwrap();
        let ba = wasserstein1_empirical(&b, &a).unwrap();
        let ac = wasserstein1_empirical(&a, &c).unwrap();
        let cb = wasserstein1_empirical(&c, &b).unwrap();
        prop_assert_eq!(wasserstein1_empirical(&a, &a).unwrap(), 0.0);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
        prop_assert!(ab <= ac + cb + 1e-12 * ab.max(1.0));
    }

    #[test]
    fn smoothed_indicator_sandwich(x in -10.0f64..10.0, rho in 1.01f64..50.0, t in -0.5f64..1.5) {
        let f = smoothed_indicator(x, rho).unwrap();
        let y = x + t / rho;
        let v = f.eval(y);
        let below = if y <= x { 1.0 } else { 0.0 };
        let above = if y <= x + 1.0 / rho { 1.0 } else { 0.0 };
        prop_assert!(below <= v && v <= above, "f({y}) = {v}");
    }

    #[test]
    fn third_derivative_scales_cubically(x in -5.0f64..5.0, rho in 1.01f64..20.0) {
        let f = smoothed_indicator(x, rho).unwrap();
        let g = smoothed_indicator(x, 2.0 * rho).unwrap();
        let ratio = g.norm(3).unwrap() / f.norm(3).unwrap();
        prop_assert!((ratio - 8.0).abs() < 1e-12);
        // Grid maxima of |f‴| follow the same scaling.
        let grid_max = |h: &stable_clt::smooth::SmoothFn, r: f64| {
            (0..=4000).map(|k| h.d3(x + k as f64 / (4000.0 * r)).abs()).fold(0.0, f64::max)
        };
        let empirical = grid_max(&g, 2.0 * rho) / grid_max(&f, rho);
        prop_assert!((empirical - 8.0).abs() < 1e-9, "{empirical}");
    }

    #[test]
    fn step_has_unit_total_variation(x in -5.0f64..5.0, rho in 1.01f64..20.0) {
        let f = smoothed_indicator(x, rho).unwrap();
        let (lo, hi) = (x - 1.0, x + 1.0 / rho + 1.0);
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let trapezoid: f64 = (0..=n)
            .map(|k| {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                w * f.d1(lo + k as f64 * h).abs()
            })
            .sum::<f64>()
            * h;
        prop_assert!((trapezoid - 1.0).abs() < 1e-6, "{trapezoid}");
    }

    #[test]
    fn power_law_fit_is_exact(c in 0.01f64..100.0, p in -2.0f64..1.0) {
        let log_points: Vec<(f64, f64)> = (2..12).map(|k| {
            let n = (1u64 << k) as f64;
            (n, c * n.powf(p))
        }).collect();
        let fit = fit_rate(&log_points, Abscissa::LogN).unwrap();
        prop_assert!((fit.exponent - p).abs() <= 1e-10 * p.abs().max(1.0));
        let loglog: Vec<(f64, f64)> = (2..12).map(|k| {
            let n = (1u64 << k) as f64;
            (n, c * n.ln().powf(p))
        }).collect();
        let fit = fit_rate(&loglog, Abscissa::LogLogN).unwrap();
        prop_assert!((fit.exponent - p).abs() <= 1e-10 * p.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn smooth_lb_monotone_and_below_w1(
        (a, b) in (50usize..300).prop_flat_map(|n| (sample_vec(n..n + 1), sample_vec(n..n + 1))),
        keep in prop::collection::vec(any::<bool>(), 76),
        order in 1usize..=3,
    ) {
        let full = TestDictionary::standard(order).unwrap();
        let spec = full.spec();
        let mut entries: Vec<_> = spec.members.iter().zip(&keep).filter(|(_, k)| **k).map(|(e, _)| *e).collect();
        if entries.is_empty() {
            entries.push(spec.members[0]);
        }
        let sub = TestDictionary::new(order, entries).unwrap();
        let (a, b) = (batch(a), batch(b));
        let lb_full = smooth_wasserstein_lb(&a, Target::Sample(&b), order, &full, &q()).unwrap().value;
        let lb_sub = smooth_wasserstein_lb(&a, Target::Sample(&b), order, &sub, &q()).unwrap().value;
        prop_assert!(lb_sub <= lb_full);
        let w1 = wasserstein1_empirical(&a, &b).unwrap();
        prop_assert!(lb_full <= w1 + 1e-12, "{lb_full} > {w1}");
    }

    #[test]
    fn symmetric_eps_has_no_skew_drift(alpha in 0.3f64..0.95, k in 0.0f64..0.3, gamma in 0.1f64..2.0, n in 2usize..100_000) {
        let law = make_attracted_law(alpha, 0.5, 0.0, EpsilonSpec::Power { k, gamma, k_left: None }, 4.0).unwrap();
        let r = bound_main(&[None; 4], &law, n, ConstantMode::Unit, &q()).unwrap();
        prop_assert_eq!(r.term(TERM_SKEW_DRIFT), 0.0);
    }

    #[test]
    fn mirrored_eps_keeps_skew_drift(
        right in prop::collection::vec(-0.1f64..0.1, 3),
        left in prop::collection::vec(-0.1f64..0.1, 3),
        n in 2usize..100_000,
    ) {
        let knots = |v: &[f64]| vec![[2.0, v[0]], [10.0, v[1]], [100.0, v[2]]];
        let law = |r: &[f64], l: &[f64]| {
            let eps = EpsilonSpec::Table { right: knots(r), left: Some(knots(l)) };
            make_attracted_law(0.7, 0.5, 0.0, eps, 2.0).unwrap()
        };
        let drift = |l: &AttractedLaw| bound_main(&[None; 4], l, n, ConstantMode::Unit, &q()).unwrap().term(TERM_SKEW_DRIFT);
        let (plain, mirrored) = (drift(&law(&right, &left)), drift(&law(&left, &right)));
        prop_assert!((plain - mirrored).abs() <= 1e-9 * plain.max(1e-300), "{plain} vs {mirrored}");
    }
}

fn built_in_laws() -> Vec<AttractedLaw> {
    vec![
        make_pareto(0.5).unwrap(),
        make_pareto(1.0).unwrap(),
        make_pareto(1.5).unwrap(),
        make_attracted_law(
            0.7,
            0.5,
            0.8,
            EpsilonSpec::Power {
                k: 0.1,
                gamma: 1.0,
                k_left: None,
            },
            2.0,
        )
        .unwrap(),
        make_attracted_law(
            0.5,
            0.5,
            0.0,
            EpsilonSpec::Power {
                k: 0.1,
                gamma: 0.3,
                k_left: None,
            },
            2.0,
        )
        .unwrap(),
        make_attracted_law(
            1.5,
            0.5,
            -0.5,
            EpsilonSpec::Power {
                k: 0.2,
                gamma: 0.5,
                k_left: Some(0.1),
            },
            2.0,
        )
        .unwrap(),
    ]
}

#[test]
fn bound_terms_nonnegative_and_total_decreasing() {
    for law in built_in_laws() {
        let mut previous = f64::INFINITY;
        for k in 2..=16 {
            let r = bound_main(&[None; 4], &law, 1 << k, ConstantMode::Unit, &q()).unwrap();
            for (name, v) in &r.terms {
                assert!(v.is_finite() && *v >= 0.0, "{name} = {v}");
            }
            assert!(r.total < previous, "total not decreasing at n = 2^{k} for {:?}", r.law);
            previous = r.total;
        }
    }
}

#[test]
fn rate_exponent_near_one() {
    let at_one = rate_exponent(1.0, 0.0, true, None).unwrap().n_exponent.unwrap();
    for d in [1e-6, 1e-9] {
        let above = rate_exponent(1.0 + d, 0.0, true, None).unwrap().n_exponent.unwrap();
        let below = rate_exponent(1.0 - d, 0.0, true, None).unwrap().n_exponent.unwrap();
        assert!((above - at_one).abs() < 10.0 * d);
        assert!((below - at_one).abs() < 10.0 * d);
    }
    // With skewness the rate jumps: (α−1)/α → 0 from below, and α = 1 is excluded.
    let skewed = rate_exponent(1.0 - 1e-9, 0.5, true, None).unwrap().n_exponent.unwrap();
    assert!(skewed.abs() < 1e-8);
    assert!(matches!(
        rate_exponent(1.0, 0.5, true, None),
        Err(Error::SingularCase { .. })
    ));
}

#[test]
fn stderr_shrinks_with_root_m() {
    let p = StableParams::standard(1.5, 0.0).unwrap();
    let se = |m: usize| {
        let s = sample_stable(&p, m, 99).unwrap();
        let v: Vec<f64> = s.values.iter().map(|y| y.cos()).collect();
        TermEstimate::from_samples(&v).stderr
    };
    let ratio = se(10_000) / se(40_000);
    assert!((ratio - 2.0).abs() < 0.5, "{ratio}");
}
