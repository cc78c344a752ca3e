use std::f64::consts::{PI, SQRT_2};

use proptest::prelude::*;
use qharm_core::domain::{BallSpec, ReflectionFrame};
use qharm_core::kernels::*;
use qharm_core::quad::tanh_sinh_pieces;

#[test]
fn interval_green_at_the_analytic_point() {
    let g = green_interval(1.0, 0.0, 1.0 / SQRT_2).unwrap();
    assert!((g - (1.0 + SQRT_2).ln() / PI).abs() < 1e-12);
}

#[test]
fn ball_green_tends_to_the_free_kernel() {
    for &(d, alpha) in &[(2usize, 0.5), (3, 1.0), (3, 0.3)] {
        let p = StableParams::new(d, alpha).unwrap();
        assert!((green_ball_profile(d, alpha, 1e14) / riesz_constant(d, alpha) - 1.0).abs() < 1e-6);
        let (x, y) = (vec![0.1; d], vec![-0.2; d]);
        let k = riesz_kernel(&p, &x, &y).unwrap();
        let mut prev = 0.0;
        for &r in &[1.0, 10.0, 1e3, 1e5] {
            let g = green_ball(&p, &BallSpec::new(vec![0.0; d], r).unwrap(), &x, &y).unwrap();
            assert!(g > prev && g <= k);
            prev = g;
        }
        assert!((prev / k - 1.0).abs() < 1e-3);
    }
}

/// The exit density equals ∫_B G_B(x, y) 𝒜(1, -α) |y - z|^{-1-α} dy.
#[test]
fn poisson_kernel_is_green_times_jump_density() {
    for &alpha in &[0.5, 1.0] {
        let p = StableParams::new(1, alpha).unwrap();
        let b = BallSpec::new(vec![0.0], 1.0).unwrap();
        for &(x, z) in &[(0.3, 1.4), (-0.6, 2.5), (0.0, -1.1)] {
            let lhs = poisson_kernel_ball(&p, &b, &[x], &[z]).unwrap();
            let rhs = tanh_sinh_pieces(
                // nodes closer to x than the squared-distance underflow carry no mass
                |y, _, _| {
                    let v = green_1d(&p, -1.0, 1.0, x, y).unwrap_or(0.0) * (y - z).abs().powf(-1.0 - alpha);
                    if v.is_finite() { v } else { 0.0 }
                },
                -1.0,
                1.0,
                &[x],
                1e-12,
            )
            .value
                * p.a_d_neg_alpha;
            assert!((lhs / rhs - 1.0).abs() < 1e-7, "α = {alpha}, x = {x}, z = {z}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn green_ball_matches_interval_formula_for_cauchy() {
    let p = StableParams::new(1, 1.0).unwrap();
    let b = BallSpec::new(vec![0.5], 2.0).unwrap();
    for &(x, y) in &[(0.1, 1.2), (-1.0, 2.3), (0.49, 0.51)] {
        let g = green_ball(&p, &b, &[x], &[y]).unwrap();
        assert!((g - green_interval(2.0, x - 0.5, y - 0.5).unwrap()).abs() < 1e-15);
        assert!((g - green_1d(&p, -1.5, 2.5, x, y).unwrap()).abs() < 1e-15);
    }
}

#[test]
fn exit_time_gradient_matches_differences() {
    let p = StableParams::new(2, 0.7).unwrap();
    let b = BallSpec::new(vec![0.2, -0.1], 1.3).unwrap();
    let x = [0.5, 0.4];
    let g = expected_exit_time_ball_grad(&p, &b, &x);
    let h = 1e-6;
    for i in 0..2 {
        let (mut xp, mut xm) = (x, x);
        xp[i] += h;
        xm[i] -= h;
        let fd = (expected_exit_time_ball(&p, &b, &xp) - expected_exit_time_ball(&p, &b, &xm)) / (2.0 * h);
        assert!((fd - g[i]).abs() < 1e-7);
    }
}

#[test]
fn rejects_degenerate_input() {
    let p = StableParams::new(1, 0.5).unwrap();
    assert!(StableParams::new(0, 0.5).is_err());
    assert!(StableParams::new(1, 2.0).is_err());
    assert!(green_interval(1.0, 0.2, 0.2).is_err());
    assert!(riesz_kernel(&StableParams::new(1, 1.5).unwrap(), &[0.0], &[1.0]).is_err());
    assert!(riesz_kernel(&p, &[0.0], &[0.0]).is_err());
    let b = BallSpec::unit(1);
    assert!(poisson_kernel_ball(&p, &b, &[0.0], &[0.5]).is_err());
    assert!(StableParams::new(1, 1.5).unwrap().require_verifiable().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn interval_green_symmetry_and_scaling(x in -0.999f64..0.999, y in -0.999f64..0.999, s in 0.1f64..10.0) {
        prop_assume!((x - y).abs() > 1e-6);
        let g = green_interval(1.0, x, y).unwrap();
        prop_assert!((g - green_interval(1.0, y, x).unwrap()).abs() <= 1e-12);
        prop_assert!((g - green_interval(s, s * x, s * y).unwrap()).abs() <= 1e-12);
        prop_assert!(g > 0.0);
    }

    #[test]
    fn ball_green_scaling(x in prop::collection::vec(-0.5f64..0.5, 3), y in prop::collection::vec(-0.5f64..0.5, 3), s in 0.2f64..5.0) {
        let p = StableParams::new(3, 0.6).unwrap();
        let b = BallSpec::unit(3);
        let sb = BallSpec::new(vec![0.0; 3], s).unwrap();
        let g = green_ball(&p, &b, &x, &y).unwrap();
        let sx: Vec<f64> = x.iter().map(|v| s * v).collect();
        let sy: Vec<f64> = y.iter().map(|v| s * v).collect();
        let gs = green_ball(&p, &sb, &sx, &sy).unwrap();
        prop_assert!((gs - s.powf(0.6 - 3.0) * g).abs() <= 1e-10 * g);
        prop_assert!((g - green_ball(&p, &b, &y, &x).unwrap()).abs() <= 1e-12 * g);
    }

    #[test]
    fn halfspace_difference_within_bound(x in prop::collection::vec(0.01f64..2.0, 2), y in prop::collection::vec(0.01f64..2.0, 2)) {
        let p = StableParams::new(2, 0.8).unwrap();
        let f = ReflectionFrame::new(0, 0.0);
        prop_assume!(x != y);
        let d = green_halfspace_diff(&p, &f, &x, &y).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(d <= halfspace_diff_bound(&p, &f, &x, &y).unwrap());
    }
}
