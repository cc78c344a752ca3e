use proptest::prelude::*;
use qharm_core::feynman_kac::{FkConfig, PotentialSpec};
use qharm_core::kernels::{exit_time_constant, StableParams};
use qharm_core::spectral::*;

/// Principal Dirichlet eigenvalue of the Cauchy process on (-1, 1), from the
/// high-precision literature value.
const CAUCHY_LAMBDA1: f64 = 1.1577738836977;

fn op(alpha: f64, m: usize) -> DiscreteOperator {
    build_discrete_frac_laplacian(&StableParams::new(1, alpha).unwrap(), -1.0, 1.0, m).unwrap()
}

#[test]
fn cauchy_eigenvalue_extrapolates_to_reference() {
    let l1 = eigenpairs(&op(1.0, 256), &PotentialSpec::zero(), 1).unwrap().values[0];
    let l2 = eigenpairs(&op(1.0, 512), &PotentialSpec::zero(), 1).unwrap().values[0];
    assert!(l1 > l2 && l2 > CAUCHY_LAMBDA1);
    let extrapolated = 2.0 * l2 - l1;
    assert!((extrapolated - CAUCHY_LAMBDA1).abs() < 5e-4, "{extrapolated}");
}

#[test]
fn exit_time_profile_has_constant_laplacian() {
    // Δ^{α/2} (1 - x²)^{α/2} = -1 / c(1, α) on (-1, 1)
    let alpha = 0.5;
    let target = -1.0 / exit_time_constant(1, alpha);
    let err = |m: usize| {
        let o = op(alpha, m);
        let u: Vec<f64> = o.nodes.iter().map(|x| (1.0 - x * x).powf(alpha / 2.0)).collect();
        let au = o.apply(&u);
        o.nodes.iter().zip(&au).filter(|(x, _)| x.abs() <= 0.5).map(|(_, v)| (v - target).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(128), err(256));
    assert!(e2 < e1 && e2 < 1e-2 * target.abs(), "{e1} {e2}");
    assert!(e1 / e2 > 1.5);
}

#[test]
fn eigenvectors_are_orthonormal_and_ordered() {
    let o = op(0.5, 96);
    let q = PotentialSpec::cone(vec![0.1], 0.5, 0.7, 1.0).unwrap();
    let e = eigenpairs(&o, &q, 4).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let ip: f64 = e.vectors[i].iter().zip(&e.vectors[j]).map(|(a, b)| a * b).sum::<f64>() * e.h;
            assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
    }
    assert!(e.values[0] < e.values[1] && e.values[1] <= e.values[2] && e.values[2] <= e.values[3]);
    assert!(e.vectors[0].iter().all(|v| *v > 0.0));
    assert!(e.vectors[1].iter().any(|v| *v < 0.0));
}

#[test]
fn principal_eigenfunction_is_symmetric() {
    let e = eigenpairs(&op(0.5, 128), &PotentialSpec::zero(), 1).unwrap();
    let v = &e.vectors[0];
    for j in 0..v.len() {
        assert!((v[j] - v[v.len() - 1 - j]).abs() < 1e-9);
    }
    // m even: the two middle nodes carry opposite gradients
    let g = e.gradient(0);
    let mid = g.len() / 2;
    assert!((g[mid] + g[mid - 1]).abs() < 1e-9);
    assert!(g[mid - 1] > 0.0);
}

#[test]
fn eigen_gradient_ratio_is_refinement_stable() {
    let coarse = eigenpairs(&op(0.5, 128), &PotentialSpec::zero(), 2).unwrap();
    let fine = eigenpairs(&op(0.5, 256), &PotentialSpec::zero(), 2).unwrap();
    let r1 = check_eigen_gradient(&coarse, &fine, 0, 0.25).unwrap();
    assert!(r1.pass, "{r1:?}");
    assert!(r1.extras["near_boundary_min_fine"] > 0.0);
    let r2 = check_eigen_gradient(&coarse, &fine, 1, 0.25).unwrap();
    assert!(r2.pass, "{r2:?}");
    assert!(!r2.extras.contains_key("near_boundary_min_fine"));
}

#[test]
fn strong_residual_decreases_with_m() {
    let q = PotentialSpec::ball_power(vec![0.0], 1.0, 1.0, 0.5).unwrap();
    let r = |m: usize| {
        let e = eigenpairs(&op(0.5, m), &q, 1).unwrap();
        strong_residual(&e, &q, 0, 0.25).unwrap()
    };
    let (a, b) = (r(128), r(256));
    assert!(b.max_abs < a.max_abs && b.max_abs < 1e-2, "{a:?} {b:?}");
    assert!(b.nodes_checked > a.nodes_checked);
}

#[test]
fn gauge_diagnostic_tracks_lambda_sign() {
    let o = op(1.0, 64);
    let q0 = PotentialSpec::ball_power(vec![0.0], 1.0, 1.0, 1.0).unwrap();
    let s_star = critical_scale(&o, &q0).unwrap();
    assert!(eigenpairs(&o, &q0.scaled(s_star), 1).unwrap().values[0].abs() < 1e-8);
    let mut cfg = FkConfig::new(6000, 0.01, 3);
    cfg.t_max = 4.0;
    let rep = check_gauge_lambda_equivalence(&o, &q0, &[0.0, 0.4 * s_star, 2.0 * s_star], &[0.0], &[0.5, 1.0, 2.0, 4.0], &cfg).unwrap();
    assert!(rep.consistent, "{rep:?}");
    assert_eq!(rep.sweep[0].verdict, GaugeVerdict::Stable);
    assert_eq!(rep.sweep[2].verdict, GaugeVerdict::Divergent);
}

#[test]
fn matrix_export_round_trips() {
    let o = op(0.7, 16);
    let text = o.to_text();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 16);
    for i in 0..16 {
        for j in 0..16 {
            assert_eq!(rows[i][j], o.matrix[(i, j)]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operator_structure(alpha in 0.1f64..=1.0, m in 16usize..48) {
        let o = op(alpha, m);
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..m {
                prop_assert_eq!(o.matrix[(i, j)], o.matrix[(j, i)]);
                if i != j {
                    prop_assert!(o.matrix[(i, j)] >= 0.0);
                }
                row += o.matrix[(i, j)];
            }
            prop_assert!(o.matrix[(i, i)] < 0.0 && row < 0.0);
        }
    }

    #[test]
    fn lambda_is_monotone_in_q(c1 in 0.0f64..1.0, c2 in 0.0f64..1.0) {
        let o = op(0.5, 32);
        let base = PotentialSpec::cone(vec![0.0], 0.8, 0.5, 1.0).unwrap();
        let (lo, hi) = if c1 < c2 { (c1, c2) } else { (c2, c1) };
        let l = |s: f64| eigenpairs(&o, &base.scaled(s), 1).unwrap().values[0];
        prop_assert!(l(0.0) >= l(lo) - 1e-12 && l(lo) >= l(hi) - 1e-12);
    }
}
