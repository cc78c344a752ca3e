use qharm_core::domain::{BallSpec, DomainSpec};
use qharm_core::feynman_kac::*;
use qharm_core::kernels::{expected_exit_time_ball, StableParams};

fn interval() -> DomainSpec {
    DomainSpec::interval(-1.0, 1.0).unwrap()
}

/// d/dc of the gauge of q ≡ c at c = 0 is E^x τ_D.
#[test]
fn nystrom_gauge_derivative_is_exit_time() {
    for &alpha in &[0.5, 1.0] {
        let p = StableParams::new(1, alpha).unwrap();
        let c = 1e-3;
        let up = IntervalSolver::new(&p, -1.0, 1.0, &PotentialSpec::constant(c), &BoundaryData::constant(1.0), 64).unwrap();
        let um = IntervalSolver::new(&p, -1.0, 1.0, &PotentialSpec::constant(-c), &BoundaryData::constant(1.0), 64).unwrap();
        for &x in &[0.0, 0.4, -0.85] {
            let d = (up.eval(x) - um.eval(x)) / (2.0 * c);
            let et = expected_exit_time_ball(&p, &BallSpec::unit(1), &[x]);
            assert!((d / et - 1.0).abs() < 1e-4, "α = {alpha}, x = {x}: {d} vs {et}");
        }
    }
}

#[test]
fn gauge_of_negative_constant_matches_nystrom() {
    let p = StableParams::new(1, 0.5).unwrap();
    let q = PotentialSpec::constant(-0.5);
    let solver = IntervalSolver::new(&p, -1.0, 1.0, &q, &BoundaryData::constant(1.0), 64).unwrap();
    let starts = vec![vec![0.0], vec![0.6]];
    for &dt in &[4e-3, 2e-3] {
        let paths = q_harmonic_paths(&p, &interval(), &q, &BoundaryData::constant(1.0), &starts, &FkConfig::new(20_000, dt, 5)).unwrap();
        assert_eq!(paths.truncated, 0);
        for (j, s) in starts.iter().enumerate() {
            let e = paths.estimate(j);
            let exact = solver.eval(s[0]);
            assert!(e.agrees_with_value(exact, 3.0) || (e.mean - exact).abs() < 5e-3, "dt = {dt}, x = {s:?}: {e:?} vs {exact}");
            assert!(e.mean < 1.0);
        }
    }
}

#[test]
fn harmonic_measure_matches_poisson_quadrature() {
    let p = StableParams::new(1, 0.5).unwrap();
    let f = BoundaryData::slab_indicator(1.0, 3.0);
    let xs = [-0.5, 0.0, 0.7];
    let starts: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x]).collect();
    let paths = q_harmonic_paths(&p, &interval(), &PotentialSpec::zero(), &f, &starts, &FkConfig::new(40_000, 2e-3, 7)).unwrap();
    for (j, &x) in xs.iter().enumerate() {
        let e = paths.estimate(j);
        let exact = f.poisson_integral_1d(&p, -1.0, 1.0, x).unwrap();
        assert!(e.agrees_with_value(exact, 3.0), "x = {x}: {e:?} vs {exact}");
    }
}

#[test]
fn green_operator_two_routes() {
    let g = |y: &[f64]| y[0] * y[0];
    for &alpha in &[0.5, 1.0] {
        let p = StableParams::new(1, alpha).unwrap();
        let x = [0.3];
        let exact = green_operator_apply(&p, &interval(), &g, &x, GreenMethod::Quadrature).unwrap().value();
        let mc = match green_operator_apply(&p, &interval(), &g, &x, GreenMethod::MonteCarlo(FkConfig::new(100_000, 2e-3, 9))).unwrap() {
            GreenValue::Estimate(e) => e,
            GreenValue::Exact(_) => unreachable!(),
        };
        assert!(mc.agrees_with_value(exact, 3.0) || (mc.mean - exact).abs() < 2e-3 * exact, "α = {alpha}: {mc:?} vs {exact}");
    }
    // balls in d = 2 against the closed-form exit time
    let p = StableParams::new(2, 0.8).unwrap();
    let ball = BallSpec::new(vec![0.1, 0.0], 0.9).unwrap();
    let v = green_operator_apply(&p, &DomainSpec::Ball(ball.clone()), &|_| 1.0, &[0.3, 0.2], GreenMethod::Quadrature).unwrap().value();
    assert!((v / expected_exit_time_ball(&p, &ball, &[0.3, 0.2]) - 1.0).abs() < 1e-6);
}

#[test]
fn representation_residuals() {
    let p = StableParams::new(1, 1.0).unwrap();
    let ball = BallSpec::new(vec![0.2], 0.5).unwrap();
    let x = [0.2];

    let f = BoundaryData::slab_indicator(1.0, 3.0);
    let harmonic = |y: &[f64]| if y[0].abs() < 1.0 { f.poisson_integral_1d(&p, -1.0, 1.0, y[0]).unwrap() } else { f.eval(y) };
    let r = representation_residual(&p, &PotentialSpec::zero(), &harmonic, &ball, &x, 20_000, 3).unwrap();
    assert!(r.mean.abs() <= 3.0 * r.stderr, "{r:?}");

    let q = PotentialSpec::ball_power(vec![0.0], 1.0, 1.0, 0.5).unwrap();
    let solver = IntervalSolver::new(&p, -1.0, 1.0, &q, &BoundaryData::constant(1.0), 64).unwrap();
    let u = |y: &[f64]| solver.eval(y[0]);
    let r = representation_residual(&p, &q, &u, &ball, &x, 20_000, 4).unwrap();
    assert!(r.mean.abs() <= 3.0 * r.stderr + 1e-6, "{r:?}");

    let r = representation_residual(&p, &q, &|_| 1.0, &ball, &x, 1000, 5).unwrap();
    let gq = green_operator_apply(&p, &DomainSpec::Ball(ball.clone()), &|y: &[f64]| q.eval(y), &x, GreenMethod::Quadrature).unwrap().value();
    assert!(gq > 0.0 && (r.mean + gq).abs() < 1e-12 && r.stderr < 1e-12);
}

#[test]
fn alpha_harmonic_function_has_zero_laplacian() {
    let p = StableParams::new(1, 0.5).unwrap();
    let f = BoundaryData::slab_indicator(1.5, 3.0);
    let u = GridFunction::sample(-1.0, 1.0, 2000, Exterior::Steps(vec![(1.5, 3.0, 1.0)]), |y| {
        if y.abs() < 1.0 { f.poisson_integral_1d(&p, -1.0, 1.0, y).unwrap() } else { 0.0 }
    });
    let exterior_only = GridFunction { values: vec![0.0; u.values.len()], ..u.clone() };
    for &x in &[-0.4, 0.0, 0.5] {
        let lap = frac_laplacian_pointwise(&p, &u, x, None, None).unwrap().value;
        let scale = frac_laplacian_pointwise(&p, &exterior_only, x, None, None).unwrap().value;
        assert!(scale > 0.0 && lap.abs() < 1e-3 * scale, "x = {x}: {lap} vs {scale}");
    }
    let unknown = GridFunction { exterior: Exterior::Unknown, ..u };
    assert!(matches!(frac_laplacian_pointwise(&p, &unknown, 0.0, None, None), Err(qharm_core::error::Error::TailModelMissing)));
}

#[test]
fn nystrom_and_monte_carlo_gauge_agree() {
    let p = StableParams::new(1, 0.5).unwrap();
    let q = PotentialSpec::critical(0.5, vec![0.0], 0.2).unwrap().scaled(3.0);
    let solver = IntervalSolver::new(&p, -1.0, 1.0, &q, &BoundaryData::constant(1.0), 96).unwrap();
    let mut cfg = FkConfig::new(40_000, 2e-3, 13);
    cfg.t_max = 50.0;
    let paths = q_harmonic_paths(&p, &interval(), &q, &BoundaryData::constant(1.0), &[vec![0.0], vec![-0.5]], &cfg).unwrap();
    for (j, x) in [0.0, -0.5].iter().enumerate() {
        let e = paths.estimate(j);
        let exact = solver.eval(*x);
        assert!(e.agrees_with_value(exact, 3.0), "x = {x}: {e:?} vs {exact}");
        assert!(e.mean >= 1.0);
    }
}

#[test]
fn non_gaugeable_pair_is_rejected() {
    let p = StableParams::new(1, 0.5).unwrap();
    let q = PotentialSpec::cone(vec![0.2], 0.6, 0.8, 2.0).unwrap();
    assert!(IntervalSolver::new(&p, -1.0, 1.0, &q, &BoundaryData::constant(1.0), 32).is_err());
    assert!(IntervalSolver::new(&p, -1.0, 1.0, &q.scaled(0.25), &BoundaryData::constant(1.0), 32).is_ok());
}

#[test]
fn crn_gradient_steps_agree() {
    let p = StableParams::new(1, 0.5).unwrap();
    let q = PotentialSpec::critical(0.5, vec![0.0], 0.2).unwrap().scaled(3.0);
    let f = BoundaryData::constant(1.0);
    let dom = interval();
    let ev = CrnEvaluator { p: &p, dom: &dom, q: &q, f: &f, cfg: FkConfig::new(40_000, 2e-3, 17) };
    let g = gradient_fd(&ev, &[0.5], 0.1).unwrap();
    let solver = IntervalSolver::new(&p, -1.0, 1.0, &q, &f, 96).unwrap();
    let exact = gradient_fd(&Deterministic(|y: &[f64]| solver.eval(y[0])), &[0.5], 0.1).unwrap();
    assert!(g.grad[0] < 0.0);
    assert!((g.grad[0] - exact.grad[0]).abs() <= 3.0 * g.stderr[0] + exact.error[0], "{g:?} vs {exact:?}");
    assert!(g.error[0] <= 3.0 * g.stderr[0] + exact.error[0]);
}
