use halfspace::extension::EXTEND_TOL;
use halfspace::growthfn::{check_condition_b, tail_integral, w_transform, ScanGrid};
use halfspace::poisson::semigroup_residual;
use halfspace::seminorms::{holder_seminorm, luxemburg_norm, HolderOptions};
use halfspace::{BoundaryDatum, EllipticSystem, Extender, GrowthFunction, Method, PoissonKernel};
use num_complex::Complex64;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn power_transforms_match_closed_forms(alpha in 0.05f64..0.95, e in -10.0f64..10.0) {
        let w = GrowthFunction::catalog("power", &[alpha]).unwrap();
        let t = 2f64.powf(e);
        let big_w = w_transform(&w, t, 1e-12).unwrap();
        prop_assert!(rel(big_w, t.powf(alpha) / alpha) < 1e-9);
        let tail = tail_integral(&w, t, 1e-12).unwrap();
        prop_assert!(rel(tail, t.powf(alpha) / (1.0 - alpha)) < 1e-8);
    }

    #[test]
    fn integrated_modulus_is_increasing(a in 0.1f64..0.5, b in 0.5f64..0.9, e in -8.0f64..8.0) {
        let w = GrowthFunction::catalog("min-powers", &[a, b]).unwrap();
        let t = 2f64.powf(e);
        let lo = w_transform(&w, t, 1e-12).unwrap();
        let hi = w_transform(&w, 1.5 * t, 1e-12).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn tail_constant_is_scale_invariant(alpha in 0.1f64..0.9, c in 0.01f64..100.0) {
        let w = GrowthFunction::catalog("power", &[alpha]).unwrap();
        let grid = ScanGrid::coarse(64);
        let a = check_condition_b(&w, &grid).constant;
        let b = check_condition_b(&w.scaled(c), &grid).constant;
        prop_assert!(rel(b, a) < 1e-9);
    }

    #[test]
    fn luxemburg_is_homogeneous(g in prop::collection::vec(-50.0f64..50.0, 1..12), c in 0.01f64..20.0) {
        let w = weights(g.len());
        let base = luxemburg_norm(&g, &w);
        let scaled: Vec<f64> = g.iter().map(|v| c * v).collect();
        let s = luxemburg_norm(&scaled, &w);
        if base == 0.0 {
            prop_assert_eq!(s, 0.0);
        } else {
            prop_assert!(rel(s, c * base) < 1e-9);
        }
    }

    #[test]
    fn luxemburg_is_monotone_and_bracketed(
        g in prop::collection::vec(0.01f64..30.0, 1..12),
        bump in prop::collection::vec(0.0f64..5.0, 12),
    ) {
        let w = weights(g.len());
        let norm = luxemburg_norm(&g, &w);
        let bigger: Vec<f64> = g.iter().zip(&bump).map(|(v, d)| v + d).collect();
        prop_assert!(luxemburg_norm(&bigger, &w) >= norm * (1.0 - 1e-12));
        // Jensen below, the sup norm above.
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        let max = g.iter().cloned().fold(0.0, f64::max);
        let ln2 = std::f64::consts::LN_2;
        prop_assert!(norm >= mean / ln2 * (1.0 - 1e-10));
        prop_assert!(norm <= max / ln2 * (1.0 + 1e-10));
    }

    #[test]
    fn lame_symbol_is_a_semigroup(
        mu in 0.5f64..2.0,
        lambda in 0.0f64..3.0,
        xi in -5.0f64..5.0,
        s in 0.05f64..2.0,
        t in 0.05f64..2.0,
    ) {
        let (sys, admissible) =
            EllipticSystem::lame(2, Complex64::new(mu, 0.0), Complex64::new(lambda, 0.0)).unwrap();
        prop_assert!(admissible);
        let r = semigroup_residual(&sys, &[vec![xi]], s, t).unwrap();
        prop_assert!(r < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn holder_seminorm_is_homogeneous_and_shift_invariant(c in -10.0f64..10.0, shift in -5.0f64..5.0) {
        let omega = GrowthFunction::catalog("power", &[0.5]).unwrap();
        let opts = HolderOptions { random_pairs: 256, ..HolderOptions::default() };
        let base = holder_seminorm(&|x: &[f64], out: &mut [f64]| out[0] = x[0].cos(), 1, 1, &omega, &opts).value;
        let moved = holder_seminorm(
            &|x: &[f64], out: &mut [f64]| out[0] = c * x[0].cos() + shift,
            1,
            1,
            &omega,
            &opts,
        )
        .value;
        prop_assert!((moved - c.abs() * base).abs() <= 1e-12 * (1.0 + base));
    }

    #[test]
    fn extension_is_linear_and_bounded(c in -5.0f64..5.0, x in -10.0f64..10.0, t in 0.05f64..4.0) {
        let k = PoissonKernel::new(EllipticSystem::laplacian(2).unwrap()).unwrap();
        let ext = Extender::new(&k).unwrap();
        let cos = BoundaryDatum::catalog("cos", 1, &[]).unwrap();
        let u = ext.value_at(&cos, &[x], t, EXTEND_TOL, Method::Auto).unwrap()[0];
        let cu = ext.value_at(&cos.scaled(c), &[x], t, EXTEND_TOL, Method::Auto).unwrap()[0];
        prop_assert!((u.re - (-t).exp() * x.cos()).abs() < 1e-6);
        prop_assert!((cu - u * c).norm() < 1e-6 * (1.0 + c.abs()));
        prop_assert!(u.norm() <= 1.0 + 1e-9);
    }
}
