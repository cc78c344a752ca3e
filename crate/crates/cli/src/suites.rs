//! Harness suites behind `qharm verify`. Monte Carlo harnesses take `n`, `dt`
//! and `seed` from the run configuration; deterministic harnesses use fixed
//! grids so their verdicts do not depend on the configuration.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use qharm_core::domain::{DomainSpec, ReflectionFrame};
use qharm_core::error::Result;
use qharm_core::feynman_kac::{BoundaryData, PotentialSpec};
use qharm_core::kernels::{expected_exit_time_ball, green_halfspace_diff, green_interval, halfspace_diff_bound, StableParams};
use qharm_core::rng::{map_paths, stream};
use qharm_core::sampling::{exit_time_levels, sample_subordinator_increment, CellGrid, SimConfig, Stepper};
use qharm_core::spectral::{build_discrete_frac_laplacian, check_eigen_gradient, eigenpairs, strong_residual};
use qharm_core::stats::McEstimate;
use qharm_core::verification::*;
use rand::Rng;

use crate::config::RunConfig;

pub const SUITES: &[&str] = &["kernels", "sampling", "reflection", "bounds", "exponents", "gradient", "counterexample", "spectral"];

/// Principal Dirichlet eigenvalue of the Cauchy process on (-1, 1).
const CAUCHY_LAMBDA1: f64 = 1.1577738836977;

/// Runs a suite; every report name is prefixed by its registered harness.
pub fn run_suite(name: &str, cfg: &RunConfig) -> Result<Vec<InequalityReport>> {
    let reports = match name {
        "kernels" => kernels(cfg),
        "sampling" => sampling(cfg),
        "reflection" => reflection(cfg),
        "bounds" => bounds(cfg),
        "exponents" => exponents(),
        "gradient" => gradient(),
        "counterexample" => counterexample(cfg),
        "spectral" => spectral(cfg),
        _ => unreachable!("suite names are validated by the caller"),
    }?;
    Ok(reports)
}

fn tagged(harness: &str, mut rep: InequalityReport) -> InequalityReport {
    rep.name = format!("{harness}: {}", rep.name);
    rep
}

/// Re-evaluates `pass` under a configured tolerance override.
pub fn apply_tolerance(mut rep: InequalityReport, cfg: &RunConfig) -> InequalityReport {
    if let Some(t) = cfg.tolerance_for(&rep.name) {
        rep.tolerance = t;
        rep.pass = match rep.kind {
            BoundKind::Upper => rep.worst_ratio <= 1.0 + t,
            BoundKind::Lower => rep.worst_ratio >= 1.0 - t,
        };
    }
    rep
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// |mean - exact| / (3 stderr), worst over the list.
fn three_sigma(name: &str, grid: &str, cases: &[(f64, McEstimate, f64)], seed: u64) -> InequalityReport {
    let (loc, worst) = cases
        .iter()
        .map(|(at, e, exact)| (*at, ratio((e.mean - exact).abs(), 3.0 * e.stderr)))
        .fold((0.0, 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
    InequalityReport::upper(name, grid, worst, vec![loc], 0.0).with_seed(seed)
}

fn kernels(cfg: &RunConfig) -> Result<Vec<InequalityReport>> {
    let g = green_interval(1.0, 0.0, FRAC_1_SQRT_2)?;
    let exact = (1.0 + SQRT_2).ln() / PI;
    let mut out = vec![InequalityReport::upper("kernel-identities: analytic point", "x = 0, y = 1/sqrt 2", (g - exact).abs() / 1e-12, vec![0.0, FRAC_1_SQRT_2], 0.0)
        .with_extra("value", g)];

    let mut rng = stream(cfg.seed, 0);
    let (mut sym, mut scale) = ((0.0, vec![]), (0.0, vec![]));
    for _ in 0..1000 {
        let x: f64 = rng.random_range(-0.999..0.999);
        let y: f64 = rng.random_range(-0.999..0.999);
        let s: f64 = rng.random_range(0.1..10.0);
        if (x - y).abs() < 1e-6 {
            continue;
        }
        let g = green_interval(1.0, x, y)?;
        let e = (g - green_interval(1.0, y, x)?).abs();
        if e > sym.0 {
            sym = (e, vec![x, y]);
        }
        let e = (g - green_interval(s, s * x, s * y)?).abs();
        if e > scale.0 {
            scale = (e, vec![x, y, s]);
        }
    }
    out.push(InequalityReport::upper("kernel-identities: symmetry", "1000 random pairs", sym.0 / 1e-12, sym.1, 0.0).with_seed(cfg.seed));
    out.push(InequalityReport::upper("kernel-identities: scaling", "1000 random pairs", scale.0 / 1e-12, scale.1, 0.0).with_seed(cfg.seed));

    let p = StableParams::new(2, cfg.alpha)?;
    let frame = ReflectionFrame::new(0, 0.0);
    let mut worst = (0.0, vec![]);
    for (x, y) in random_positive_pairs(2, 2.0, 1000, cfg.seed) {
        if x == y {
            continue;
        }
        let r = green_halfspace_diff(&p, &frame, &x, &y)? / halfspace_diff_bound(&p, &frame, &x, &y)?;
        if r > worst.0 {
            worst = (r, [x, y].concat());
        }
    }
    out.push(InequalityReport::upper("kernel-identities: half-space bound", "1000 random pairs, d = 2", worst.0, worst.1, 0.0).with_seed(cfg.seed));
    Ok(out)
}

fn sampling(cfg: &RunConfig) -> Result<Vec<InequalityReport>> {
    let alpha = cfg.alpha.min(1.0);
    let n = cfg.n;
    let t = 0.7;
    let eta = map_paths(n, cfg.seed, 0, |_, rng| sample_subordinator_increment(alpha / 2.0, t, rng));
    let eta: Vec<f64> = eta.into_iter().collect::<Result<_>>()?;
    let laplace: Vec<_> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&s| {
            let e = McEstimate::from_samples(&eta.iter().map(|v| (-s * v).exp()).collect::<Vec<_>>(), cfg.seed);
            (s, e, (-t * f64::powf(s, alpha / 2.0)).exp())
        })
        .collect();

    let p = StableParams::new(1, alpha)?;
    let st = Stepper::new(&p);
    let scale = st.eta_scale(0.5);
    let xs = map_paths(n, cfg.seed, n as u64, |_, rng| {
        let mut x = [0.0];
        st.step(scale, rng, &mut x);
        x[0]
    });
    let chf: Vec<_> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&xi| {
            let e = McEstimate::from_samples(&xs.iter().map(|x| (xi * x).cos()).collect::<Vec<_>>(), cfg.seed);
            (xi, e, (-0.5 * f64::powf(xi, alpha)).exp())
        })
        .collect();

    let dom = DomainSpec::interval(-1.0, 1.0)?;
    let lv = exit_time_levels(&p, &dom, &[0.0], 0.02, 3, 200.0, n, cfg.seed)?;
    let exact = expected_exit_time_ball(&p, &qharm_core::domain::BallSpec::unit(1), &[0.0]);
    let fine = lv.mean[2];
    let bias = lv.paired_diff[1].mean.abs();
    Ok(vec![
        three_sigma("sampler: Laplace transform", "s in {0.5, 1, 2}, t = 0.7", &laplace, cfg.seed),
        three_sigma("sampler: characteristic function", "xi in {0.5, 1, 2}, t = 0.5", &chf, cfg.seed),
        InequalityReport::upper("sampler: exit time", "x = 0 in (-1, 1), dt = 0.005", ratio((fine.mean - exact).abs(), 3.0 * fine.stderr + bias), vec![0.0], 0.0)
            .with_seed(cfg.seed)
            .with_extra("estimate", fine.mean)
            .with_extra("exact", exact),
        InequalityReport::upper("sampler: exit-time refinement", "dt = 0.02, 0.01, 0.005", ratio(lv.paired_diff[1].mean.abs(), lv.paired_diff[0].mean.abs()), vec![], 0.0)
            .with_seed(cfg.seed)
            .with_extra("diff_coarse", lv.paired_diff[0].mean)
            .with_extra("diff_fine", lv.paired_diff[1].mean),
    ])
}

fn reflection(cfg: &RunConfig) -> Result<Vec<InequalityReport>> {
    let p = StableParams::new(1, cfg.alpha)?;
    let dom = DomainSpec::interval(-1.0, 1.0)?;
    let frame = ReflectionFrame::new(0, 0.0);
    let grid = CellGrid::interval(0.0, 1.0, 10);
    let sim = SimConfig::new(cfg.n, cfg.dt, cfg.seed)?;
    let ok = check_reflection_identity(&p, &dom, &frame, 0.25, &[0.3], &grid, &sim, 0.0)?;
    let ctl = check_reflection_identity(&p, &dom, &frame, 0.25, &[0.3], &grid, &sim, 0.1)?;
    // the shifted control passes when the mismatch is detected
    let control = InequalityReport::lower("reflection-identity: shifted control", &ctl.grid, ctl.worst_ratio, ctl.worst_location.clone(), 0.0).with_seed(cfg.seed);
    Ok(vec![tagged("reflection-identity", ok), control])
}

fn bounds(cfg: &RunConfig) -> Result<Vec<InequalityReport>> {
    let mut out = vec![];
    let step = |y: f64| (3.0 * y).sin() + y * y + (y > 0.2) as u8 as f64;
    out.push(tagged("coupling-identity", check_coupling_identity(&StableParams::new(1, cfg.alpha.min(1.0))?, 1.0, &step, &[0.2], &[0.05, 0.3, 0.7])?));
    let p3 = StableParams::new(3, cfg.alpha)?;
    let pairs = random_positive_pairs(3, 1.0, 400, cfg.seed);
    out.push(tagged("green-monotonicity", check_green_monotonicity(&p3, 1.0, 2.5, &pairs)?.with_seed(cfg.seed)));
    out.push(tagged("green-upper-bounds", check_green_upper_bounds(&p3, 1.0, &pairs)?.with_seed(cfg.seed)));
    out.push(tagged("green-cone-lower-bound", check_green_lower_bounds(&p3, 1.0, &[0.05, 0.1, 0.2], 8)?));
    let cauchy = StableParams::new(1, 1.0)?;
    out.push(tagged("interval-explicit-bounds", check_green_upper_bounds(&cauchy, 1.0, &positive_grid_1d(1.0, 50))?));
    let xs: Vec<f64> = (1..=50).map(|i| 0.25 * i as f64 / 51.0).collect();
    out.push(tagged("interval-explicit-bounds", check_green_lower_bounds(&cauchy, 1.0, &xs, 50)?));
    Ok(out)
}

fn exponents() -> Result<Vec<InequalityReport>> {
    let ts = dyadic_offsets(10, 17);
    [(0.5, 0.2), (0.5, 0.8), (1.0, 0.0)].iter().map(|&(a, b)| Ok(tagged("betau-exponents", check_betau(&StableParams::new(1, a)?, b, 1.0, &ts)?))).collect()
}

fn gradient() -> Result<Vec<InequalityReport>> {
    let p = StableParams::new(1, 0.5)?;
    let mut out = vec![
        tagged("green-gradient-formula", check_gradient_green_formula(&p, 0.5, 0.8, 1.0, 1e-3)?),
        tagged("green-gradient-formula", check_gradient_green_scaling(&p, 0.8, 1.0, &[0.5, 0.25, 0.125, 0.0625])?),
    ];
    let q = PotentialSpec::cone(vec![0.2], 0.6, 0.8, 0.5)?;
    let sweep = RatioSweep::two_decades(-1.0, 1.0, 1e-3, 1e-1, 9, 48);
    out.push(tagged("main-gradient-ratio", check_main_gradient_estimate(&p, &q, &BoundaryData::constant(1.0), &sweep)?));
    let cauchy = StableParams::new(1, 1.0)?;
    let q1 = PotentialSpec::cone(vec![-0.3], 0.5, 0.4, 0.5)?;
    out.push(tagged("main-gradient-ratio", check_main_gradient_estimate(&cauchy, &q1, &BoundaryData::slab_indicator(1.0, 3.0), &sweep)?));
    let near_right = RatioSweep { ends: vec![false, true], ..sweep };
    out.push(tagged("boundary-sharpness", check_boundary_sharpness(&p, &q, &BoundaryData::slab_indicator(-3.0, -1.0), &near_right, 0.1)?));
    Ok(out)
}

fn counterexample(cfg: &RunConfig) -> Result<Vec<InequalityReport>> {
    let p = StableParams::new(1, cfg.alpha)?;
    let hs = dyadic_offsets(3, 8);
    let q = PotentialSpec::critical(cfg.alpha, vec![0.0], cfg.r)?;
    let dom = DomainSpec::interval(-1.0, 1.0)?;
    let mc = counterexample_blowup(&p, &dom, &q, 0.0, cfg.r, &hs, &cfg.fk())?;
    let mut rep = InequalityReport::lower("counterexample-blowup: slope of the difference quotient", "h = 2^-3 .. 2^-8", ratio(mc.b.mean, 1.645 * mc.b.stderr), vec![mc.z], 0.0)
        .with_seed(cfg.seed)
        .with_extra("b", mc.b.mean)
        .with_extra("b_stderr", mc.b.stderr);
    if let Ok(ny) = counterexample_blowup_nystrom(&p, -1.0, 1.0, &q, 0.0, cfg.r, &hs, cfg.nodes) {
        rep = rep.with_extra("b_deterministic", ny.b.mean);
    }
    Ok(vec![rep])
}

fn spectral(cfg: &RunConfig) -> Result<Vec<InequalityReport>> {
    let m = cfg.m;
    let half = StableParams::new(1, cfg.alpha.min(1.0))?;
    let zero = PotentialSpec::zero();
    let eig = |p: &StableParams, m: usize, q: &PotentialSpec| eigenpairs(&build_discrete_frac_laplacian(p, -1.0, 1.0, m)?, q, 1);
    let mut out = vec![tagged("eigen-gradient", check_eigen_gradient(&eig(&half, m, &zero)?, &eig(&half, 2 * m, &zero)?, 0, 0.25)?)];

    let q = PotentialSpec::ball_power(vec![0.0], 1.0, 1.0, 0.5)?;
    let r1 = strong_residual(&eig(&half, m, &q)?, &q, 0, 0.25)?;
    let r2 = strong_residual(&eig(&half, 2 * m, &q)?, &q, 0, 0.25)?;
    out.push(
        InequalityReport::upper("strong-solution-residual: refinement", &format!("m = {m}, {}; delta >= 1/4", 2 * m), ratio(r2.max_abs, r1.max_abs), vec![r2.location], 0.0)
            .with_extra("residual_coarse", r1.max_abs)
            .with_extra("residual_fine", r2.max_abs),
    );

    let cauchy = StableParams::new(1, 1.0)?;
    let (l1, l2) = (eig(&cauchy, m, &zero)?.values[0], eig(&cauchy, 2 * m, &zero)?.values[0]);
    let extrapolated = 2.0 * l2 - l1;
    out.push(
        InequalityReport::upper("spectral: Cauchy eigenvalue", &format!("m = {m}, {}", 2 * m), (extrapolated - CAUCHY_LAMBDA1).abs() / 5e-4, vec![], 0.0)
            .with_extra("lambda_coarse", l1)
            .with_extra("lambda_fine", l2)
            .with_extra("extrapolated", extrapolated),
    );
    Ok(out)
}
