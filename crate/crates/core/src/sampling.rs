//! Paths of the symmetric α-stable process built as X_t = B(η_t), with B a
//! Brownian motion of generator Δ (variance 2 per unit time and coordinate)
//! and η the α/2-stable subordinator, E e^{-sη_t} = e^{-t s^{α/2}}.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{BallSpec, DomainSpec, ReflectionFrame};
use crate::error::{Error, Result};
use crate::kernels::StableParams;
use crate::rng::{map_paths, PathRng};
use crate::stats::McEstimate;

/// Standard positive a-stable variate, E e^{-sS} = e^{-s^a}, via the
/// Kanter representation.
#[inline]
fn positive_stable_unit<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let u: f64 = PI * rng.sample::<f64, _>(Open01);
    let w: f64 = rng.sample(Exp1);
    let num = (a * u).sin() / u.sin().powf(1.0 / a);
    num * (((1.0 - a) * u).sin() / w).powf((1.0 - a) / a)
}

/// One increment η_{t+dt} - η_t of the `alpha_half`-stable subordinator.
pub fn sample_subordinator_increment<R: Rng + ?Sized>(alpha_half: f64, dt: f64, rng: &mut R) -> Result<f64> {
    if !(alpha_half > 0.0 && alpha_half < 1.0) {
        return Err(Error::InvalidIndex(alpha_half));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    Ok(dt.powf(1.0 / alpha_half) * positive_stable_unit(alpha_half, rng))
}

/// Streaming stepper for the subordinated Brownian motion.
#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    a: f64,
}

impl Stepper {
    pub fn new(p: &StableParams) -> Self {
        Self { a: p.alpha / 2.0 }
    }

    /// Factor turning a unit stable draw into an increment over `dt`.
    pub fn eta_scale(&self, dt: f64) -> f64 {
        dt.powf(1.0 / self.a)
    }

    #[inline]
    pub fn draw_eta(&self, scale: f64, rng: &mut PathRng) -> f64 {
        scale * positive_stable_unit(self.a, rng)
    }

    /// Moves `x` by B over a subordinator increment `de`.
    #[inline]
    pub fn brownian_move(de: f64, rng: &mut PathRng, x: &mut [f64]) {
        let s = (2.0 * de).sqrt();
        for xi in x.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *xi += s * z;
        }
    }

    /// One time step; returns the subordinator increment.
    #[inline]
    pub fn step(&self, scale: f64, rng: &mut PathRng, x: &mut [f64]) -> f64 {
        let de = self.draw_eta(scale, rng);
        Self::brownian_move(de, rng, x);
        de
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorRecord {
    pub times: Vec<f64>,
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitInfo {
    pub index: usize,
    pub position: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub subordinator: SubordinatorRecord,
    /// B(η(t_k)) for every grid time, starting with x₀.
    pub points: Vec<Vec<f64>>,
    pub start: Vec<f64>,
    pub exit: Option<ExitInfo>,
}

fn time_grid(dt: f64, t_max: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt <= t_max && t_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < dt = {dt} <= t_max = {t_max}")));
    }
    let n = (t_max / dt - 1e-9).ceil().max(1.0) as usize;
    let mut t: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    t[n] = t_max;
    Ok(t)
}

/// Subordinator values on the grid, shared by [`sample_path`] and the coupling.
fn sample_subordinator(p: &StableParams, times: &[f64], rng: &mut PathRng) -> Vec<f64> {
    let st = Stepper::new(p);
    let mut eta = Vec::with_capacity(times.len());
    eta.push(0.0);
    let mut acc = 0.0;
    for w in times.windows(2) {
        acc += st.draw_eta(st.eta_scale(w[1] - w[0]), rng);
        eta.push(acc);
    }
    eta
}

/// A discretised α-stable path started at `x0` on the grid k·dt up to `t_max`.
pub fn sample_path(p: &StableParams, x0: &[f64], dt: f64, t_max: f64, rng: &mut PathRng) -> Result<PathSample> {
    if x0.len() != p.d {
        return Err(Error::InvalidParameter("starting point has the wrong dimension".into()));
    }
    let times = time_grid(dt, t_max)?;
    let eta = sample_subordinator(p, &times, rng);
    let mut x = x0.to_vec();
    let mut points = Vec::with_capacity(times.len());
    points.push(x.clone());
    for w in eta.windows(2) {
        Stepper::brownian_move(w[1] - w[0], rng, &mut x);
        points.push(x.clone());
    }
    Ok(PathSample { subordinator: SubordinatorRecord { times, eta }, points, start: x0.to_vec(), exit: None })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstExit {
    pub index: Option<usize>,
    /// Midpoint of the grid interval in which the exit was detected, or the
    /// horizon when the path never left.
    pub time: f64,
    pub position: Vec<f64>,
    pub exited: bool,
}

/// First grid point outside `dom`.
pub fn first_exit(path: &PathSample, dom: &DomainSpec) -> Result<FirstExit> {
    if !dom.contains(&path.start) {
        return Err(Error::OutOfDomain("path must start inside the domain".into()));
    }
    let t = &path.subordinator.times;
    for (k, x) in path.points.iter().enumerate().skip(1) {
        if !dom.contains(x) {
            return Ok(FirstExit { index: Some(k), time: 0.5 * (t[k - 1] + t[k]), position: x.clone(), exited: true });
        }
    }
    Ok(FirstExit {
        index: None,
        time: *t.last().unwrap(),
        position: path.points.last().unwrap().clone(),
        exited: false,
    })
}

impl PathSample {
    pub fn with_exit(mut self, dom: &DomainSpec) -> Result<Self> {
        let e = first_exit(&self, dom)?;
        self.exit = e.index.map(|index| ExitInfo { index, position: e.position });
        Ok(self)
    }
}

/// Probability that a Brownian bridge of variance 2 per unit time, from
/// signed distance `u` to `v` over time `de`, touches the hyperplane.
#[inline]
pub fn bridge_crossing_probability(u: f64, v: f64, de: f64) -> f64 {
    if u <= 0.0 || v <= 0.0 {
        return 1.0;
    }
    if de <= 0.0 {
        return 0.0;
    }
    (-u * v / de).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledPair {
    pub primary: PathSample,
    pub mirrored: PathSample,
    /// First grid index at which the two legs coincide.
    pub switch_index: Option<usize>,
    /// Subordinator interval (η_{k-1}, η_k] containing the Brownian hitting time T.
    pub hit_bracket: Option<(f64, f64)>,
}

/// Reflection coupling: the mirrored leg is the reflection of the primary
/// Brownian driver until it hits the hyperplane, and equal to it afterwards.
///
/// Between grid points the hitting event is drawn from the exact bridge
/// crossing probability, so the coupling has the exact law at grid times.
pub fn sample_coupled_pair(
    p: &StableParams,
    frame: &ReflectionFrame,
    x0: &[f64],
    dt: f64,
    t_max: f64,
    rng: &mut PathRng,
) -> Result<CoupledPair> {
    if frame.side(x0) < 0.0 {
        return Err(Error::WrongSide);
    }
    let primary = sample_path(p, x0, dt, t_max, rng)?;
    let eta = &primary.subordinator.eta;
    let mut mirrored_pts = Vec::with_capacity(primary.points.len());
    let mut switch_index = None;
    let mut hit_bracket = None;
    if frame.side(x0) == 0.0 {
        switch_index = Some(0);
    }
    for (k, x) in primary.points.iter().enumerate() {
        if switch_index.is_none() && k > 0 {
            let u = frame.side(&primary.points[k - 1]);
            let v = frame.side(x);
            let de = eta[k] - eta[k - 1];
            let pr = bridge_crossing_probability(u, v, de);
            if pr >= 1.0 || (pr > 0.0 && rng.random::<f64>() < pr) {
                switch_index = Some(k);
                hit_bracket = Some((eta[k - 1], eta[k]));
            }
        }
        match switch_index {
            Some(s) if k >= s => mirrored_pts.push(x.clone()),
            _ => mirrored_pts.push(frame.reflect(x)),
        }
    }
    let mirrored = PathSample {
        subordinator: primary.subordinator.clone(),
        points: mirrored_pts,
        start: frame.reflect(x0),
        exit: None,
    };
    Ok(CoupledPair { primary, mirrored, switch_index, hit_bracket })
}

/// Exact draw of X(τ_B) from the Poisson kernel of a ball.
///
/// From the centre |X(τ_B) - c| = r / √V with V ~ Beta(α/2, 1 - α/2) in a
/// uniform direction; other starts repeat this on the largest ball centred at
/// the current point until the draw leaves `b`.
pub fn sample_ball_exit_exact<R: Rng + ?Sized>(p: &StableParams, b: &BallSpec, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if !b.contains(x) {
        return Err(Error::OutOfDomain("start must lie inside the ball".into()));
    }
    let radial = Beta::new(p.alpha / 2.0, 1.0 - p.alpha / 2.0)
        .map_err(|e| Error::InvalidParameter(format!("radial law: {e}")))?;
    let mut cur = x.to_vec();
    loop {
        let delta = b.radius - crate::domain::dist(&cur, &b.center);
        let v: f64 = radial.sample(rng);
        let rho = delta / v.sqrt();
        let dir = uniform_direction(p.d, rng);
        for (c, u) in cur.iter_mut().zip(&dir) {
            *c += rho * u;
        }
        if b.gap(&cur) < 0.0 {
            return Ok(cur);
        }
    }
}

fn uniform_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::domain::norm(&g);
        if n > 1e-12 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

/// Equal-volume cells over an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells_per_axis: Vec<usize>,
}

impl CellGrid {
    pub fn interval(lo: f64, hi: f64, cells: usize) -> Self {
        Self { lo: vec![lo], hi: vec![hi], cells_per_axis: vec![cells] }
    }

    pub fn len(&self) -> usize {
        self.cells_per_axis.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for i in 0..self.lo.len() {
            let f = (x[i] - self.lo[i]) / (self.hi[i] - self.lo[i]);
            if !(0.0..1.0).contains(&f) {
                return None;
            }
            let c = ((f * self.cells_per_axis[i] as f64) as usize).min(self.cells_per_axis[i] - 1);
            idx = idx * self.cells_per_axis[i] + c;
        }
        Some(idx)
    }

    /// Centre of a 1-d cell.
    pub fn centre_1d(&self, k: usize) -> f64 {
        let h = (self.hi[0] - self.lo[0]) / self.cells_per_axis[0] as f64;
        self.lo[0] + (k as f64 + 0.5) * h
    }
}

pub const MIN_RELIABLE_COUNT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub grid: CellGrid,
    pub mass: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Cells with fewer than [`MIN_RELIABLE_COUNT`] contributing paths.
    pub unreliable: Vec<bool>,
    pub total: McEstimate,
    pub n: usize,
    pub seed: u64,
}

impl Histogram {
    /// Cell-wise difference of two independent histograms.
    pub fn minus_independent(&self, other: &Histogram) -> Histogram {
        let mass = self.mass.iter().zip(&other.mass).map(|(a, b)| a - b).collect();
        let stderr = self.stderr.iter().zip(&other.stderr).map(|(a, b)| a.hypot(*b)).collect();
        let unreliable = self.unreliable.iter().zip(&other.unreliable).map(|(a, b)| *a || *b).collect();
        let total = McEstimate {
            mean: self.total.mean - other.total.mean,
            stderr: self.total.stderr.hypot(other.total.stderr),
            n: self.n,
            seed: self.seed,
        };
        Histogram { grid: self.grid.clone(), mass, stderr, unreliable, total, n: self.n, seed: self.seed }
    }
}

/// Per-path signed cell contributions with values in {-1, 0, 1}.
struct SignedCounts {
    sum: Vec<i64>,
    abs: Vec<u64>,
    tot_sum: i64,
    tot_abs: u64,
}

impl SignedCounts {
    fn new(m: usize) -> Self {
        Self { sum: vec![0; m], abs: vec![0; m], tot_sum: 0, tot_abs: 0 }
    }

    fn add_pair(&mut self, plus: Option<usize>, minus: Option<usize>) {
        match (plus, minus) {
            (Some(a), Some(b)) if a == b => {}
            _ => {
                if let Some(a) = plus {
                    self.sum[a] += 1;
                    self.abs[a] += 1;
                }
                if let Some(b) = minus {
                    self.sum[b] -= 1;
                    self.abs[b] += 1;
                }
            }
        }
        let t = plus.is_some() as i64 - minus.is_some() as i64;
        self.tot_sum += t;
        self.tot_abs += t.unsigned_abs();
    }

    fn into_histogram(self, grid: &CellGrid, n: usize, seed: u64) -> Histogram {
        let nf = n as f64;
        let moments = |s: i64, a: u64| {
            let m = s as f64 / nf;
            let var = (a as f64 / nf - m * m).max(0.0) * nf / (nf - 1.0);
            (m, (var / nf).sqrt())
        };
        let (mass, stderr) = self.sum.iter().zip(&self.abs).map(|(s, a)| moments(*s, *a)).unzip();
        let unreliable = self.abs.iter().map(|&a| (a as usize) < MIN_RELIABLE_COUNT).collect();
        let (tm, ts) = moments(self.tot_sum, self.tot_abs);
        Histogram {
            grid: grid.clone(),
            mass,
            stderr,
            unreliable,
            total: McEstimate { mean: tm, stderr: ts, n, seed },
            n,
            seed,
        }
    }
}

/// Settings shared by the path-based estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub dt: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n: usize, dt: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("need at least two paths".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
        }
        Ok(Self { n, dt, seed })
    }

    /// Steps of equal length ending exactly at `t`.
    pub fn steps_to(&self, t: f64) -> (usize, f64) {
        let k = (t / self.dt - 1e-9).ceil().max(1.0) as usize;
        (k, t / k as f64)
    }
}

/// Seed for an estimator that must be independent of the one keyed by `seed`.
pub fn independent_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Cell masses of p_D(t, x0, ·): the process killed at the first grid time
/// outside `dom`.
pub fn estimate_killed_density(
    p: &StableParams,
    dom: &DomainSpec,
    t: f64,
    x0: &[f64],
    grid: &CellGrid,
    cfg: &SimConfig,
) -> Result<Histogram> {
    if !dom.contains(x0) {
        return Err(Error::OutOfDomain("start must lie inside the domain".into()));
    }
    let st = Stepper::new(p);
    let (k, h) = cfg.steps_to(t);
    let scale = st.eta_scale(h);
    let cells = map_paths(cfg.n, cfg.seed, 0, |_, rng| {
        let mut x = x0.to_vec();
        for _ in 0..k {
            st.step(scale, rng, &mut x);
            if !dom.contains(&x) {
                return None;
            }
        }
        grid.cell_of(&x)
    });
    let mut acc = SignedCounts::new(grid.len());
    for c in cells {
        acc.add_pair(c, None);
    }
    Ok(acc.into_histogram(grid, cfg.n, cfg.seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectedDensity {
    pub from_x: Histogram,
    pub from_xhat: Histogram,
    /// p_D(t, x, ·) - p_D(t, x̂, ·) from the coupled pair, paired errors.
    pub coupled_difference: Histogram,
    /// Subordinated Brownian motion killed on leaving D₊, independent seeds.
    pub direct: Histogram,
}

/// Two estimators of the killed density of the subordinated killed Brownian
/// motion on the positive half `D₊`.
pub fn estimate_reflected_killed_density(
    p: &StableParams,
    dom: &DomainSpec,
    frame: &ReflectionFrame,
    t: f64,
    x0: &[f64],
    grid: &CellGrid,
    cfg: &SimConfig,
) -> Result<ReflectedDensity> {
    if !dom.is_symmetric(frame) {
        return Err(Error::AsymmetricDomain);
    }
    if frame.side(x0) < 0.0 {
        return Err(Error::WrongSide);
    }
    if !dom.contains(x0) {
        return Err(Error::OutOfDomain("start must lie inside the domain".into()));
    }
    let st = Stepper::new(p);
    let (k, h) = cfg.steps_to(t);
    let scale = st.eta_scale(h);

    let coupled = map_paths(cfg.n, cfg.seed, 0, |_, rng| {
        let mut x = x0.to_vec();
        let mut xh = frame.reflect(x0);
        let mut switched = frame.side(x0) == 0.0;
        let (mut alive, mut alive_h) = (true, true);
        for _ in 0..k {
            let u = frame.side(&x);
            let de = st.step(scale, rng, &mut x);
            if !switched {
                let pr = bridge_crossing_probability(u, frame.side(&x), de);
                switched = pr >= 1.0 || (pr > 0.0 && rng.random::<f64>() < pr);
            }
            xh.copy_from_slice(&x);
            if !switched {
                frame.reflect_in_place(&mut xh);
            }
            alive &= dom.contains(&x);
            alive_h &= dom.contains(&xh);
            if !alive && !alive_h {
                break;
            }
        }
        let c = if alive { grid.cell_of(&x) } else { None };
        let ch = if alive_h { grid.cell_of(&xh) } else { None };
        (c, ch)
    });

    let direct_seed = independent_seed(cfg.seed);
    let direct = map_paths(cfg.n, direct_seed, 0, |_, rng| {
        let mut x = x0.to_vec();
        if frame.side(x0) == 0.0 {
            return None;
        }
        for _ in 0..k {
            let u = frame.side(&x);
            let de = st.step(scale, rng, &mut x);
            let pr = bridge_crossing_probability(u, frame.side(&x), de);
            if pr >= 1.0 || (pr > 0.0 && rng.random::<f64>() < pr) || !dom.contains(&x) {
                return None;
            }
        }
        grid.cell_of(&x)
    });

    let m = grid.len();
    let (mut a, mut b, mut diff, mut dir) = (SignedCounts::new(m), SignedCounts::new(m), SignedCounts::new(m), SignedCounts::new(m));
    for (c, ch) in coupled {
        a.add_pair(c, None);
        b.add_pair(ch, None);
        diff.add_pair(c, ch);
    }
    for c in direct {
        dir.add_pair(c, None);
    }
    Ok(ReflectedDensity {
        from_x: a.into_histogram(grid, cfg.n, cfg.seed),
        from_xhat: b.into_histogram(grid, cfg.n, cfg.seed),
        coupled_difference: diff.into_histogram(grid, cfg.n, cfg.seed),
        direct: dir.into_histogram(grid, cfg.n, direct_seed),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeLevels {
    /// Time steps, coarsest first.
    pub dt: Vec<f64>,
    pub mean: Vec<McEstimate>,
    /// mean[l] - mean[l + 1] from the same paths.
    pub paired_diff: Vec<McEstimate>,
    /// Paths still inside at the horizon on the finest level.
    pub truncated: usize,
}

/// Mean exit time at several resolutions from common paths: one path is
/// simulated on the finest grid and monitored on every coarser sub-grid.
pub fn exit_time_levels(
    p: &StableParams,
    dom: &DomainSpec,
    x0: &[f64],
    dt_coarse: f64,
    levels: usize,
    t_max: f64,
    n: usize,
    seed: u64,
) -> Result<ExitTimeLevels> {
    if !dom.contains(x0) {
        return Err(Error::OutOfDomain("start must lie inside the domain".into()));
    }
    if levels == 0 || n < 2 {
        return Err(Error::InvalidParameter("need at least one level and two paths".into()));
    }
    let st = Stepper::new(p);
    let fine = dt_coarse / (1u64 << (levels - 1)) as f64;
    let scale = st.eta_scale(fine);
    let max_steps = (t_max / fine).ceil() as usize;
    let strides: Vec<usize> = (0..levels).map(|l| 1usize << (levels - 1 - l)).collect();
    let per_path = map_paths(n, seed, 0, |_, rng| {
        let mut x = x0.to_vec();
        let mut out = vec![f64::NAN; levels];
        let mut open = levels;
        let mut j = 0;
        while open > 0 && j < max_steps {
            st.step(scale, rng, &mut x);
            j += 1;
            let outside = !dom.contains(&x);
            for (l, &s) in strides.iter().enumerate() {
                if out[l].is_nan() && j % s == 0 && outside {
                    out[l] = (j as f64 - 0.5 * s as f64) * fine;
                    open -= 1;
                }
            }
        }
        for v in out.iter_mut() {
            if v.is_nan() {
                *v = t_max;
            }
        }
        (out, open > 0)
    });
    let truncated = per_path.iter().filter(|(_, t)| *t).count();
    let mut mean = Vec::new();
    let mut paired_diff = Vec::new();
    for l in 0..levels {
        let v: Vec<f64> = per_path.iter().map(|(o, _)| o[l]).collect();
        mean.push(McEstimate::from_samples(&v, seed));
        if l + 1 < levels {
            let d: Vec<f64> = per_path.iter().map(|(o, _)| o[l] - o[l + 1]).collect();
            paired_diff.push(McEstimate::from_samples(&d, seed));
        }
    }
    let dt = strides.iter().map(|&s| s as f64 * fine).collect();
    Ok(ExitTimeLevels { dt, mean, paired_diff, truncated })
}
