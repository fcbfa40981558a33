use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nscauchy::boundary::{forward_traces, recover_normal_data, GraphShape, QuadraticFlow, SurfacePatch};
use nscauchy::experiments::fit_holder;
use nscauchy::fields::{divergence_identity_residual, SpaceTimeGrid, VectorField};
use nscauchy::forward::{extract_cauchy, manufactured_solution};
use nscauchy::weights::{
    balance_s, cutoff_chi, holder_terms, holder_theta, implied_c_cal, Balance, GammaSpec, HolderBoundParams, Side,
};

fn grid() -> SpaceTimeGrid {
    SpaceTimeGrid::unit(9, 9, 3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_recovers_exact_power_laws(theta in 0.05f64..2.0, c in 1e-3f64..1e3) {
        let deltas = [1e-3f64, 3e-3, 1e-2, 3e-2];
        let errors: Vec<f64> = deltas.iter().map(|d| c * d.powf(theta)).collect();
        let fit = fit_holder(&deltas, &errors, 0.0).unwrap();
        prop_assert!((fit.theta - theta).abs() < 1e-10);
        prop_assert!((fit.r2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fit_slope_ignores_error_scale(
        errors in prop::collection::vec(1e-3f64..1e3, 5),
        scale in 1e-3f64..1e3,
    ) {
        let deltas = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
        let a = fit_holder(&deltas, &errors, 0.0).unwrap();
        let scaled: Vec<f64> = errors.iter().map(|e| e * scale).collect();
        let b = fit_holder(&deltas, &scaled, 0.0).unwrap();
        prop_assert!((a.theta - b.theta).abs() < 1e-9);
        prop_assert!((a.r2 - b.r2).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&a.r2));
    }

    #[test]
    fn balanced_branches_agree(
        m in 0.1f64..10.0,
        ratio in 1e-6f64..0.9,
        c in 0.05f64..5.0,
        gap in 0.01f64..2.0,
    ) {
        let p = HolderBoundParams::new(m, m * ratio, c, 1.0, 1.0 + gap).unwrap();
        let Balance::Finite { s_star, theta } = balance_s(&p) else { panic!("finite data") };
        prop_assert!(s_star > 0.0);
        prop_assert!(theta > 0.0 && theta < 1.0);
        let (a, b) = holder_terms(&p, s_star);
        prop_assert!((a - b).abs() <= 1e-10 * a);
        prop_assert!((implied_c_cal(holder_theta(gap, c), gap) - c).abs() <= 1e-10 * c);
    }

    #[test]
    fn cutoff_is_monotone_in_unit_interval(a in -1.0f64..3.0, b in -1.0f64..3.0) {
        let mu = [0.0, 0.5, 1.5, 2.0];
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (x, y) = (cutoff_chi(lo, mu), cutoff_chi(hi, mu));
        prop_assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
        prop_assert!(x <= y);
    }

    #[test]
    fn identity_residual_is_linear_in_velocity(
        c1 in prop::array::uniform4(-2.0f64..2.0),
        c2 in prop::array::uniform4(-2.0f64..2.0),
        alpha in -3.0f64..3.0,
    ) {
        let g = grid();
        let a = VectorField::from_fn2(g, |x, y, t| [(x + t).sin(), (x * y).cos()]);
        let field = |c: [f64; 4]| VectorField::from_fn2(g, move |x, y, _| {
            [c[0] * (2.0 * y).sin() + c[1] * x * x, c[2] * (x - y).exp() + c[3] * x * y]
        });
        let (u, w) = (field(c1), field(c2));
        let sum = &u.scale(alpha) + &w;
        let lhs = divergence_identity_residual(&a, &sum).unwrap();
        let ru = divergence_identity_residual(&a, &u).unwrap();
        let rw = divergence_identity_residual(&a, &w).unwrap();
        let rhs = &ru.scale(alpha) + &rw;
        let scale = 1.0 + ru.sup_norm() + rw.sup_norm();
        prop_assert!((&lhs - &rhs).sup_norm() <= 1e-10 * scale);
    }

    #[test]
    fn normal_data_recovery_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0, theta in -0.8f64..0.8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let patch = SurfacePatch::new(2, GraphShape::Paraboloid { curvature: [0.4, 0.0] }).unwrap();
        let f = QuadraticFlow::random(2, &mut rng);
        let h = QuadraticFlow::random(2, &mut rng);
        let mut comb = f.clone();
        comb.v0 = &f.v0 * alpha + &h.v0;
        comb.v1 = &f.v1 * alpha + &h.v1;
        comb.v2 = f.v2.iter().zip(&h.v2).map(|(a, b)| a * alpha + b).collect();
        comb.p0 = f.p0 * alpha + h.p0;
        comb.p1 = &f.p1 * alpha + &h.p1;
        comb.p2 = &f.p2 * alpha + &h.p2;
        let rec = |flow: &QuadraticFlow| {
            recover_normal_data(&forward_traces(&patch, &[theta], flow, 0.1), &patch, &[theta]).unwrap()
        };
        let (rf, rh, rc) = (rec(&f), rec(&h), rec(&comb));
        let expect = &rf.grad * alpha + &rh.grad;
        prop_assert!((&rc.grad - &expect).norm() <= 1e-10 * (1.0 + expect.norm()));
        prop_assert!((rc.p - (alpha * rf.p + rh.p)).abs() <= 1e-10 * (1.0 + rc.p.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn noisy_traces_are_deterministic_per_seed(seed in any::<u64>(), delta in 0.0f64..0.1) {
        let g = grid();
        let m = manufactured_solution("oseen", &g, 0.1).unwrap();
        let gamma = GammaSpec::new(Side::Bottom, 0.25, 0.75);
        let a = extract_cauchy(&m.truth, &gamma, 0.1, delta, seed).unwrap();
        let b = extract_cauchy(&m.truth, &gamma, 0.1, delta, seed).unwrap();
        prop_assert_eq!(a.values, b.values);
        prop_assert_eq!(a.misfit.to_bits(), b.misfit.to_bits());
    }
}
