//! Feynman-Kac functionals of the killed α-stable process: gauge functions,
//! q-harmonic extensions, the Green operator, finite-difference gradients and
//! the pointwise fractional Laplacian.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{dist, BallSpec, DomainSpec};
use crate::error::{Error, Result};
use crate::kernels::{green_1d, green_ball, poisson_kernel_ball, StableParams};
use crate::quad::{gauss_legendre, tanh_sinh, tanh_sinh_semi_infinite};
use crate::rng::map_paths;
use crate::sampling::{sample_ball_exit_exact, Stepper};
use crate::stats::McEstimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    Constant { c: f64 },
    /// c (r² - |x - w|²)₊^e
    BallPower { center: Vec<f64>, radius: f64, exponent: f64, c: f64 },
    /// c (1 - |x - w| / r)₊^η
    Cone { center: Vec<f64>, radius: f64, eta: f64, c: f64 },
    /// c exp(-|x - w|² / s²)
    Gaussian { center: Vec<f64>, width: f64, c: f64 },
}

/// Potential with declared Hölder data |q(x) - q(y)| ≤ A |x - y|^η.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub holder_a: f64,
    pub holder_eta: f64,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self { kind: PotentialKind::Zero, holder_a: 0.0, holder_eta: 1.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { kind: PotentialKind::Constant { c }, holder_a: 0.0, holder_eta: 1.0 }
    }

    pub fn ball_power(center: Vec<f64>, radius: f64, exponent: f64, c: f64) -> Result<Self> {
        if !(radius > 0.0 && exponent > 0.0) {
            return Err(Error::InvalidParameter("ball potential needs positive radius and exponent".into()));
        }
        let (holder_a, holder_eta) = if exponent <= 1.0 {
            (c.abs() * (2.0 * radius).powf(exponent), exponent)
        } else {
            (c.abs() * 2.0 * exponent * radius.powf(2.0 * exponent - 1.0), 1.0)
        };
        Ok(Self { kind: PotentialKind::BallPower { center, radius, exponent, c }, holder_a, holder_eta })
    }

    /// 1_{B(w,r)}(x) (r² - |x - w|²)^{1-α}, Hölder of exponent exactly 1 - α.
    pub fn critical(alpha: f64, center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::ball_power(center, radius, 1.0 - alpha, 1.0)
    }

    pub fn cone(center: Vec<f64>, radius: f64, eta: f64, c: f64) -> Result<Self> {
        if !(radius > 0.0 && eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter("cone potential needs radius > 0 and η ∈ (0, 1]".into()));
        }
        Ok(Self { kind: PotentialKind::Cone { center, radius, eta, c }, holder_a: c.abs() * radius.powf(-eta), holder_eta: eta })
    }

    pub fn gaussian(center: Vec<f64>, width: f64, c: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidParameter("gaussian potential needs a positive width".into()));
        }
        // sup |∇q| = c √(2/e) / s
        let holder_a = c.abs() * (2.0 / std::f64::consts::E).sqrt() / width;
        Ok(Self { kind: PotentialKind::Gaussian { center, width, c }, holder_a, holder_eta: 1.0 })
    }

    /// s · q, with the Hölder constant scaled accordingly.
    pub fn scaled(&self, s: f64) -> Self {
        let kind = match &self.kind {
            PotentialKind::Zero => PotentialKind::Zero,
            PotentialKind::Constant { c } => PotentialKind::Constant { c: s * c },
            PotentialKind::BallPower { center, radius, exponent, c } => {
                PotentialKind::BallPower { center: center.clone(), radius: *radius, exponent: *exponent, c: s * c }
            }
            PotentialKind::Cone { center, radius, eta, c } => {
                PotentialKind::Cone { center: center.clone(), radius: *radius, eta: *eta, c: s * c }
            }
            PotentialKind::Gaussian { center, width, c } => PotentialKind::Gaussian { center: center.clone(), width: *width, c: s * c },
        };
        Self { kind, holder_a: self.holder_a * s.abs(), holder_eta: self.holder_eta }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Constant { c } => *c,
            PotentialKind::BallPower { center, radius, exponent, c } => {
                let s: f64 = x.iter().zip(center).map(|(a, w)| (a - w) * (a - w)).sum();
                let g = radius * radius - s;
                if g <= 0.0 {
                    0.0
                } else if *exponent == 0.5 {
                    c * g.sqrt()
                } else {
                    c * g.powf(*exponent)
                }
            }
            PotentialKind::Cone { center, radius, eta, c } => {
                let t = 1.0 - dist(x, center) / radius;
                if t <= 0.0 {
                    0.0
                } else {
                    c * t.powf(*eta)
                }
            }
            PotentialKind::Gaussian { center, width, c } => {
                let s: f64 = x.iter().zip(center).map(|(a, w)| (a - w) * (a - w)).sum();
                c * (-s / (width * width)).exp()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            PotentialKind::Zero => true,
            PotentialKind::Constant { c } => *c == 0.0,
            PotentialKind::BallPower { c, .. } | PotentialKind::Cone { c, .. } | PotentialKind::Gaussian { c, .. } => *c == 0.0,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match &self.kind {
            PotentialKind::Zero => true,
            PotentialKind::Constant { c } => *c >= 0.0,
            PotentialKind::BallPower { c, .. } | PotentialKind::Cone { c, .. } | PotentialKind::Gaussian { c, .. } => *c >= 0.0,
        }
    }

    /// Closed ball outside of which q vanishes, if any.
    pub fn support(&self) -> Option<BallSpec> {
        match &self.kind {
            PotentialKind::BallPower { center, radius, .. } | PotentialKind::Cone { center, radius, .. } => {
                Some(BallSpec { center: center.clone(), radius: *radius })
            }
            _ => None,
        }
    }

    /// Largest observed |q(x) - q(y)| / (A |x - y|^η) over the given pairs.
    pub fn holder_ratio(&self, pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        pairs
            .iter()
            .filter(|(x, y)| dist(x, y) > 0.0)
            .map(|(x, y)| {
                let lhs = (self.eval(x) - self.eval(y)).abs();
                if lhs == 0.0 {
                    0.0
                } else {
                    lhs / (self.holder_a * dist(x, y).powf(self.holder_eta))
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryKind {
    Constant { c: f64 },
    /// Indicator of {z : lo ≤ z₁ ≤ hi}.
    SlabIndicator { lo: f64, hi: f64 },
    BallIndicator { ball: BallSpec },
    Combination { terms: Vec<(f64, BoundaryData)> },
}

/// Exterior data f for the q-harmonic extension E^x[e_q(τ_D) f(X(τ_D))].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub kind: BoundaryKind,
    pub bounded: bool,
    pub nonnegative: bool,
}

impl BoundaryData {
    pub fn constant(c: f64) -> Self {
        Self { kind: BoundaryKind::Constant { c }, bounded: true, nonnegative: c >= 0.0 }
    }

    pub fn slab_indicator(lo: f64, hi: f64) -> Self {
        Self { kind: BoundaryKind::SlabIndicator { lo, hi }, bounded: true, nonnegative: true }
    }

    pub fn ball_indicator(ball: BallSpec) -> Self {
        Self { kind: BoundaryKind::BallIndicator { ball }, bounded: true, nonnegative: true }
    }

    pub fn combination(terms: Vec<(f64, BoundaryData)>) -> Self {
        let nonnegative = terms.iter().all(|(w, f)| *w >= 0.0 && f.nonnegative);
        let bounded = terms.iter().all(|(_, f)| f.bounded);
        Self { kind: BoundaryKind::Combination { terms }, bounded, nonnegative }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        match &self.kind {
            BoundaryKind::Constant { c } => *c,
            BoundaryKind::SlabIndicator { lo, hi } => (z[0] >= *lo && z[0] <= *hi) as u8 as f64,
            BoundaryKind::BallIndicator { ball } => (ball.gap(z) >= 0.0) as u8 as f64,
            BoundaryKind::Combination { terms } => terms.iter().map(|(w, f)| w * f.eval(z)).sum(),
        }
    }

    /// ∫ P_D(x, z) f(z) dz for an interval D = (a, b).
    pub fn poisson_integral_1d(&self, p: &StableParams, a: f64, b: f64, x: f64) -> Result<f64> {
        let ball = BallSpec { center: vec![0.5 * (a + b)], radius: 0.5 * (b - a) };
        let kernel = |z: f64| poisson_kernel_ball(p, &ball, &[x], &[z]).unwrap_or(0.0);
        // ∫ over [lo, hi] ∩ D^c, split at the interval ends
        let piece = |lo: f64, hi: f64| -> f64 {
            let mut total = 0.0;
            let left = (lo, hi.min(a));
            let right = (lo.max(b), hi);
            for (l, h) in [left, right] {
                if !(h > l) {
                    continue;
                }
                if h.is_infinite() {
                    total += tanh_sinh_semi_infinite(|z, _| kernel(z), l, 1e-11).value;
                } else if l.is_infinite() {
                    total += tanh_sinh_semi_infinite(|z, _| kernel(-z), -h, 1e-11).value;
                } else {
                    total += tanh_sinh(|z, _, _| kernel(z), l, h, 1e-11).value;
                }
            }
            total
        };
        Ok(match &self.kind {
            BoundaryKind::Constant { c } => *c,
            BoundaryKind::SlabIndicator { lo, hi } => piece(*lo, *hi),
            BoundaryKind::BallIndicator { ball } => piece(ball.center[0] - ball.radius, ball.center[0] + ball.radius),
            BoundaryKind::Combination { terms } => {
                let mut s = 0.0;
                for (w, f) in terms {
                    s += w * f.poisson_integral_1d(p, a, b, x)?;
                }
                s
            }
        })
    }
}

/// Monte Carlo settings for the Feynman-Kac estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkConfig {
    pub n: usize,
    pub dt: f64,
    pub seed: u64,
    /// Initial horizon; paths still alive are continued up to `t_cap`.
    pub t_max: f64,
    pub t_cap: f64,
}

impl FkConfig {
    pub fn new(n: usize, dt: f64, seed: u64) -> Self {
        Self { n, dt, seed, t_max: 20.0, t_cap: 320.0 }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || !(self.dt > 0.0) || !(self.t_max >= self.dt) || self.t_cap < self.t_max {
            return Err(Error::InvalidParameter(format!("invalid Monte Carlo settings {self:?}")));
        }
        Ok(())
    }
}

/// Per-path Feynman-Kac weights for several starting points driven by the
/// same increments (common random numbers).
#[derive(Debug, Clone, PartialEq)]
pub struct FkPaths {
    pub starts: Vec<Vec<f64>>,
    /// Row-major n × starts.len().
    pub values: Vec<f64>,
    pub n: usize,
    pub seed: u64,
    /// Path-start combinations still alive at `t_cap`; they contribute 0.
    pub truncated: usize,
}

impl FkPaths {
    pub fn column(&self, j: usize) -> Vec<f64> {
        let m = self.starts.len();
        (0..self.n).map(|i| self.values[i * m + j]).collect()
    }

    pub fn estimate(&self, j: usize) -> McEstimate {
        McEstimate::from_samples(&self.column(j), self.seed)
    }

    /// Estimate of Σ_j w_j u(x_j) with the path-wise paired error.
    pub fn linear(&self, w: &[f64]) -> McEstimate {
        let m = self.starts.len();
        let v: Vec<f64> = (0..self.n).map(|i| w.iter().enumerate().map(|(j, wj)| wj * self.values[i * m + j]).sum()).collect();
        McEstimate::from_samples(&v, self.seed)
    }
}

/// Which functional each path contributes.
#[derive(Clone, Copy)]
enum Payoff<'a> {
    /// e_q(τ_D) f(X(τ_D))
    Exit(&'a BoundaryData),
    /// ∫₀^{τ_D} g(X_s) ds
    Occupation(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

fn fk_engine(
    p: &StableParams,
    dom: &DomainSpec,
    q: &PotentialSpec,
    payoff: Payoff<'_>,
    starts: &[Vec<f64>],
    cfg: &FkConfig,
) -> Result<FkPaths> {
    cfg.validate()?;
    if !dom.is_bounded() {
        return Err(Error::InvalidParameter("Feynman-Kac estimators need a bounded domain".into()));
    }
    for s in starts {
        if s.len() != p.d || !dom.contains(s) {
            return Err(Error::OutOfDomain(format!("start {s:?}")));
        }
    }
    let m = starts.len();
    let st = Stepper::new(p);
    let scale = st.eta_scale(cfg.dt);
    let max_steps = (cfg.t_cap / cfg.dt).ceil() as usize;
    let half = 0.5 * cfg.dt;
    let rows = map_paths(cfg.n, cfg.seed, 0, |_, rng| {
        let mut shift = vec![0.0; p.d];
        let mut pos = vec![0.0; p.d];
        let mut alive = vec![true; m];
        let mut acc = vec![0.0; m];
        let mut prev: Vec<f64> = starts
            .iter()
            .map(|s| match payoff {
                Payoff::Exit(_) => q.eval(s),
                Payoff::Occupation(g) => g(s),
            })
            .collect();
        let mut out = vec![0.0; m];
        let mut open = m;
        let mut k = 0;
        while open > 0 && k < max_steps {
            st.step(scale, rng, &mut shift);
            k += 1;
            for j in 0..m {
                if !alive[j] {
                    continue;
                }
                for ((c, s), d) in pos.iter_mut().zip(&starts[j]).zip(&shift) {
                    *c = s + d;
                }
                if dom.contains(&pos) {
                    let v = match payoff {
                        Payoff::Exit(_) => q.eval(&pos),
                        Payoff::Occupation(g) => g(&pos),
                    };
                    acc[j] += half * (prev[j] + v);
                    prev[j] = v;
                } else {
                    acc[j] += half * prev[j];
                    alive[j] = false;
                    open -= 1;
                    out[j] = match payoff {
                        Payoff::Exit(f) => acc[j].exp() * f.eval(&pos),
                        Payoff::Occupation(_) => acc[j],
                    };
                }
            }
        }
        (out, open)
    });
    let mut values = Vec::with_capacity(cfg.n * m);
    let mut truncated = 0;
    for (row, open) in rows {
        values.extend(row);
        truncated += open;
    }
    Ok(FkPaths { starts: starts.to_vec(), values, n: cfg.n, seed: cfg.seed, truncated })
}

/// E^x[e_q(τ_D) f(X(τ_D))] at every start from common paths.
pub fn q_harmonic_paths(
    p: &StableParams,
    dom: &DomainSpec,
    q: &PotentialSpec,
    f: &BoundaryData,
    starts: &[Vec<f64>],
    cfg: &FkConfig,
) -> Result<FkPaths> {
    fk_engine(p, dom, q, Payoff::Exit(f), starts, cfg)
}

/// Gauge u_D(x) = E^x e_q(τ_D).
pub fn gauge(p: &StableParams, dom: &DomainSpec, q: &PotentialSpec, x: &[f64], cfg: &FkConfig) -> Result<McEstimate> {
    Ok(q_harmonic_paths(p, dom, q, &BoundaryData::constant(1.0), &[x.to_vec()], cfg)?.estimate(0))
}

/// Regular q-harmonic extension of exterior data f.
pub fn q_harmonic_eval(
    p: &StableParams,
    dom: &DomainSpec,
    q: &PotentialSpec,
    f: &BoundaryData,
    x: &[f64],
    cfg: &FkConfig,
) -> Result<McEstimate> {
    Ok(q_harmonic_paths(p, dom, q, f, &[x.to_vec()], cfg)?.estimate(0))
}

/// Per-path truncated gauge e_q(τ_D ∧ T) and survivor weight e_q(T) 1{τ_D > T}
/// at several horizons, from common paths.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonPaths {
    pub horizons: Vec<f64>,
    /// Row-major n × horizons.len().
    pub truncated: Vec<f64>,
    pub survivor: Vec<f64>,
    pub n: usize,
    pub seed: u64,
}

impl HorizonPaths {
    fn column(v: &[f64], h: usize, k: usize) -> Vec<f64> {
        v.iter().skip(k).step_by(h).copied().collect()
    }

    pub fn truncated_estimate(&self, k: usize) -> McEstimate {
        McEstimate::from_samples(&Self::column(&self.truncated, self.horizons.len(), k), self.seed)
    }

    /// E[e_q(T); τ > T]; for a gaugeable pair it decays like e^{-λ₁ T}.
    pub fn survivor_estimate(&self, k: usize) -> McEstimate {
        McEstimate::from_samples(&Self::column(&self.survivor, self.horizons.len(), k), self.seed)
    }

    /// E[e_q(τ ∧ T_{k+1}) - e_q(τ ∧ T_k)] with the paired error.
    pub fn increment(&self, k: usize) -> McEstimate {
        let h = self.horizons.len();
        let d: Vec<f64> = (0..self.n).map(|i| self.truncated[i * h + k + 1] - self.truncated[i * h + k]).collect();
        McEstimate::from_samples(&d, self.seed)
    }
}

pub fn horizon_paths(
    p: &StableParams,
    dom: &DomainSpec,
    q: &PotentialSpec,
    x: &[f64],
    horizons: &[f64],
    cfg: &FkConfig,
) -> Result<HorizonPaths> {
    cfg.validate()?;
    if !dom.contains(x) {
        return Err(Error::OutOfDomain(format!("start {x:?}")));
    }
    if horizons.windows(2).any(|w| w[1] <= w[0]) || horizons.is_empty() {
        return Err(Error::InvalidParameter("horizons must increase".into()));
    }
    let st = Stepper::new(p);
    let scale = st.eta_scale(cfg.dt);
    let marks: Vec<usize> = horizons.iter().map(|t| (t / cfg.dt).round().max(1.0) as usize).collect();
    let last = *marks.last().unwrap();
    let half = 0.5 * cfg.dt;
    let hn = horizons.len();
    let rows = map_paths(cfg.n, cfg.seed, 0, |_, rng| {
        let mut pos = x.to_vec();
        let mut acc = 0.0;
        let mut prev = q.eval(x);
        let mut trunc = vec![0.0; hn];
        let mut surv = vec![0.0; hn];
        let mut next = 0;
        let mut k = 0;
        while k < last {
            st.step(scale, rng, &mut pos);
            k += 1;
            if dom.contains(&pos) {
                let v = q.eval(&pos);
                acc += half * (prev + v);
                prev = v;
                while next < hn && marks[next] == k {
                    trunc[next] = acc.exp();
                    surv[next] = trunc[next];
                    next += 1;
                }
            } else {
                acc += half * prev;
                for t in trunc.iter_mut().skip(next) {
                    *t = acc.exp();
                }
                break;
            }
        }
        (trunc, surv)
    });
    let mut truncated = Vec::with_capacity(cfg.n * hn);
    let mut survivor = Vec::with_capacity(cfg.n * hn);
    for (t, s) in rows {
        truncated.extend(t);
        survivor.extend(s);
    }
    Ok(HorizonPaths { horizons: horizons.to_vec(), truncated, survivor, n: cfg.n, seed: cfg.seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GreenMethod {
    Quadrature,
    MonteCarlo(FkConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GreenValue {
    Exact(f64),
    Estimate(McEstimate),
}

impl GreenValue {
    pub fn value(&self) -> f64 {
        match self {
            GreenValue::Exact(v) => *v,
            GreenValue::Estimate(e) => e.mean,
        }
    }
}

/// G_D g(x) = E^x ∫₀^{τ_D} g(X_s) ds.
pub fn green_operator_apply(
    p: &StableParams,
    dom: &DomainSpec,
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    method: GreenMethod,
) -> Result<GreenValue> {
    match method {
        GreenMethod::MonteCarlo(cfg) => {
            let paths = fk_engine(p, dom, &PotentialSpec::zero(), Payoff::Occupation(g), &[x.to_vec()], &cfg)?;
            Ok(GreenValue::Estimate(paths.estimate(0)))
        }
        GreenMethod::Quadrature => {
            if !dom.contains(x) {
                return Ok(GreenValue::Exact(0.0));
            }
            match dom {
                DomainSpec::Interval { a, b } => {
                    let (a, b) = (*a, *b);
                    let f = |y: f64| {
                        let v = green_1d(p, a, b, x[0], y).unwrap_or(0.0) * g(&[y]);
                        if v.is_finite() {
                            v
                        } else {
                            0.0
                        }
                    };
                    let left = tanh_sinh(|_, _, dh| f(x[0] - dh), a, x[0], 1e-11).value;
                    let right = tanh_sinh(|_, dl, _| f(x[0] + dl), x[0], b, 1e-11).value;
                    Ok(GreenValue::Exact(left + right))
                }
                DomainSpec::Ball(ball) => Ok(GreenValue::Exact(green_ball_polar(p, ball, g, x)?)),
                other => Err(Error::UnsupportedQuadrature(format!("{other:?}"))),
            }
        }
    }
}

/// ∫_B G_B(x, y) g(y) dy in polar coordinates centred at x.
fn green_ball_polar(p: &StableParams, ball: &BallSpec, g: &(dyn Fn(&[f64]) -> f64 + Sync), x: &[f64]) -> Result<f64> {
    let d = p.d;
    let radial = |dir: &[f64]| -> f64 {
        // ρ_max solves |x + ρ θ - c| = r
        let xc: Vec<f64> = x.iter().zip(&ball.center).map(|(a, c)| a - c).collect();
        let bdot: f64 = xc.iter().zip(dir).map(|(a, t)| a * t).sum();
        let cc: f64 = xc.iter().map(|a| a * a).sum::<f64>() - ball.radius * ball.radius;
        let rho_max = -bdot + (bdot * bdot - cc).sqrt();
        tanh_sinh(
            |rho, _, _| {
                let y: Vec<f64> = x.iter().zip(dir).map(|(a, t)| a + rho * t).collect();
                green_ball(p, ball, x, &y).unwrap_or(0.0) * g(&y) * rho.powi(d as i32 - 1)
            },
            0.0,
            rho_max,
            1e-10,
        )
        .value
    };
    match d {
        1 => Ok(radial(&[1.0]) + radial(&[-1.0])),
        2 => {
            let n = 64;
            let h = 2.0 * PI / n as f64;
            Ok((0..n).map(|k| radial(&[(k as f64 * h).cos(), (k as f64 * h).sin()])).sum::<f64>() * h)
        }
        3 => {
            let (ct, wt) = gauss_legendre(24);
            let n = 48;
            let h = 2.0 * PI / n as f64;
            let mut s = 0.0;
            for (c, w) in ct.iter().zip(&wt) {
                let st = (1.0 - c * c).sqrt();
                for k in 0..n {
                    let ph = k as f64 * h;
                    s += w * h * radial(&[st * ph.cos(), st * ph.sin(), *c]);
                }
            }
            Ok(s)
        }
        _ => Err(Error::UnsupportedQuadrature(format!("ball quadrature in d = {d}"))),
    }
}

/// Estimates u(x) - E^x u(X(τ_B)) - G_B(q u)(x).
///
/// The exit position is drawn exactly from the Poisson kernel of the ball and
/// G_B(q u)(x) is computed by quadrature, so the residual carries only the
/// sampling error of the harmonic-measure term.
pub fn representation_residual(
    p: &StableParams,
    q: &PotentialSpec,
    u_eval: &(dyn Fn(&[f64]) -> f64 + Sync),
    ball: &BallSpec,
    x: &[f64],
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !ball.contains(x) {
        return Err(Error::OutOfDomain("x must lie in the ball".into()));
    }
    let qu = |y: &[f64]| q.eval(y) * u_eval(y);
    let gqu = green_operator_apply(p, &DomainSpec::Ball(ball.clone()), &qu, x, GreenMethod::Quadrature)?.value();
    let ux = u_eval(x);
    let samples = map_paths(n, seed, 0, |_, rng| {
        let z = sample_ball_exit_exact(p, ball, x, rng).expect("start checked");
        ux - u_eval(&z) - gqu
    });
    Ok(McEstimate::from_samples(&samples, seed))
}

/// Evaluator of u(plus) - u(minus) with the standard error of the difference.
pub trait FieldEvaluator {
    fn difference(&self, plus: &[f64], minus: &[f64]) -> Result<(f64, f64)>;
}

/// Wraps a deterministic function.
pub struct Deterministic<F>(pub F);

impl<F: Fn(&[f64]) -> f64> FieldEvaluator for Deterministic<F> {
    fn difference(&self, plus: &[f64], minus: &[f64]) -> Result<(f64, f64)> {
        Ok(((self.0)(plus) - (self.0)(minus), 0.0))
    }
}

/// q-harmonic Monte Carlo evaluator pairing ±h points on common paths.
pub struct CrnEvaluator<'a> {
    pub p: &'a StableParams,
    pub dom: &'a DomainSpec,
    pub q: &'a PotentialSpec,
    pub f: &'a BoundaryData,
    pub cfg: FkConfig,
}

impl FieldEvaluator for CrnEvaluator<'_> {
    fn difference(&self, plus: &[f64], minus: &[f64]) -> Result<(f64, f64)> {
        let paths = q_harmonic_paths(self.p, self.dom, self.q, self.f, &[plus.to_vec(), minus.to_vec()], &self.cfg)?;
        let e = paths.linear(&[1.0, -1.0]);
        Ok((e.mean, e.stderr))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    /// Central differences at step h/2.
    pub grad: Vec<f64>,
    /// Richardson estimate |D_h - D_{h/2}| / 3 per coordinate.
    pub error: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Central-difference gradient at steps h and h/2.
pub fn gradient_fd(u: &dyn FieldEvaluator, x: &[f64], h: f64) -> Result<GradientEstimate> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step {h} must be positive")));
    }
    let d = x.len();
    let (mut grad, mut error, mut stderr) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    for i in 0..d {
        let mut quot = [0.0; 2];
        for (slot, step) in [h, 0.5 * h].into_iter().enumerate() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += step;
            xm[i] -= step;
            let (diff, se) = u.difference(&xp, &xm)?;
            if se > 0.0 && diff.abs() < 5.0 * se {
                return Err(Error::NoiseDominated { diff: diff.abs(), stderr: se });
            }
            quot[slot] = diff / (2.0 * step);
            if slot == 1 {
                stderr[i] = se / (2.0 * step);
            }
        }
        grad[i] = quot[1];
        error[i] = (quot[0] - quot[1]).abs() / 3.0;
    }
    Ok(GradientEstimate { grad, error, stderr })
}

/// Behaviour of a grid function outside its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Exterior {
    Constant(f64),
    /// Value v on each [lo, hi] (lo, hi, v), zero elsewhere.
    Steps(Vec<(f64, f64, f64)>),
    /// Only known on the grid.
    Unknown,
}

/// Samples of u on the uniform grid a = x_0 < … < x_n = b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub a: f64,
    pub b: f64,
    pub values: Vec<f64>,
    pub exterior: Exterior,
}

impl GridFunction {
    pub fn sample(a: f64, b: f64, n_cells: usize, exterior: Exterior, u: impl Fn(f64) -> f64) -> Self {
        let h = (b - a) / n_cells as f64;
        Self { a, b, values: (0..=n_cells).map(|k| u(a + k as f64 * h)).collect(), exterior }
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / (self.values.len() - 1) as f64
    }

    /// Cubic Lagrange interpolation on the four nearest nodes.
    pub fn eval(&self, y: f64) -> f64 {
        let n = self.values.len() - 1;
        if y < self.a || y > self.b {
            return match &self.exterior {
                Exterior::Constant(c) => *c,
                Exterior::Steps(steps) => steps.iter().filter(|(lo, hi, _)| y >= *lo && y <= *hi).map(|s| s.2).sum(),
                Exterior::Unknown => f64::NAN,
            };
        }
        let h = self.spacing();
        let s = (y - self.a) / h;
        let k = (s.floor() as isize).clamp(1, n as isize - 2) as usize;
        let t = s - k as f64;
        let (p0, p1, p2, p3) = (self.values[k - 1], self.values[k], self.values[k + 1], self.values[k + 2]);
        let l0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let l1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let l2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let l3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        p0 * l0 + p1 * l1 + p2 * l2 + p3 * l3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseLaplacian {
    pub value: f64,
    /// Contribution of |y - x| < ε from the local quadratic fit.
    pub inner: f64,
    /// Lipschitz bound 𝒜 · 2A ε^{1-α} / (1 - α) on the inner part, when finite.
    pub inner_bound: Option<f64>,
}

/// 𝒜(1, -α) PV ∫ (u(y) - u(x)) |y - x|^{-1-α} dy for a grid function in d = 1.
pub fn frac_laplacian_pointwise(
    p: &StableParams,
    u: &GridFunction,
    x: f64,
    eps_split: Option<f64>,
    lipschitz: Option<f64>,
) -> Result<PointwiseLaplacian> {
    if p.d != 1 {
        return Err(Error::UnsupportedRegime("grid functions are one-dimensional".into()));
    }
    if u.exterior == Exterior::Unknown {
        return Err(Error::TailModelMissing);
    }
    if !(x > u.a && x < u.b) {
        return Err(Error::OutOfDomain(format!("x = {x} outside the grid")));
    }
    let alpha = p.alpha;
    let h = u.spacing();
    let eps = eps_split.unwrap_or(2.0 * h).min(0.5 * (x - u.a).min(u.b - x));
    let ux = u.eval(x);
    // second derivative of the local quadratic through x, x ± ε/2
    let e2 = 0.5 * eps;
    let c2 = (u.eval(x + e2) + u.eval(x - e2) - 2.0 * ux) / (e2 * e2) / 2.0;
    let inner = 2.0 * c2 * eps.powf(2.0 - alpha) / (2.0 - alpha);

    // grid part on [a, x - ε] ∪ [x + ε, b], Gauss-Legendre per cell
    let (gx, gw) = gauss_legendre(8);
    let mut grid_part = 0.0;
    let mut integrate = |lo: f64, hi: f64| {
        if hi <= lo {
            return;
        }
        let cells = ((hi - lo) / h).ceil().max(1.0) as usize;
        let w = (hi - lo) / cells as f64;
        for c in 0..cells {
            let m = lo + (c as f64 + 0.5) * w;
            for (t, wt) in gx.iter().zip(&gw) {
                let y = m + 0.5 * w * t;
                grid_part += 0.5 * w * wt * (u.eval(y) - ux) * (y - x).abs().powf(-1.0 - alpha);
            }
        }
    };
    integrate(u.a, x - eps);
    integrate(x + eps, u.b);
    // exterior: ∫_{y ∉ [a,b]} (u(y) - u(x)) |y - x|^{-1-α} dy in closed form
    let mass = |lo: f64, hi: f64| -> f64 {
        // ∫ |y - x|^{-1-α} over [lo, hi] disjoint from x
        let (n, f) = if lo > x { (lo - x, hi - x) } else { (x - hi, x - lo) };
        (n.powf(-alpha) - if f.is_infinite() { 0.0 } else { f.powf(-alpha) }) / alpha
    };
    let mut tail = -ux * ((x - u.a).powf(-alpha) + (u.b - x).powf(-alpha)) / alpha;
    match &u.exterior {
        Exterior::Constant(c) => tail += c * ((x - u.a).powf(-alpha) + (u.b - x).powf(-alpha)) / alpha,
        Exterior::Steps(steps) => {
            for &(lo, hi, v) in steps {
                for (l, h) in [(lo, hi.min(u.a)), (lo.max(u.b), hi)] {
                    if h > l {
                        tail += v * mass(l, h);
                    }
                }
            }
        }
        Exterior::Unknown => unreachable!(),
    }
    let a_neg = p.a_d_neg_alpha;
    let inner_bound = match lipschitz {
        Some(lip) if alpha < 1.0 => Some(a_neg * 2.0 * lip * eps.powf(1.0 - alpha) / (1.0 - alpha)),
        _ => None,
    };
    Ok(PointwiseLaplacian { value: a_neg * (inner + grid_part + tail), inner: a_neg * inner, inner_bound })
}

/// Deterministic q-harmonic solver on an interval.
///
/// Solves u = P f + G_D(q u) by Nyström collocation with piecewise-linear u on
/// nodes clustered at the ends of supp q, then evaluates u anywhere through
/// the same integral identity.
#[derive(Debug, Clone)]
pub struct IntervalSolver {
    pub p: StableParams,
    pub a: f64,
    pub b: f64,
    pub q: PotentialSpec,
    pub f: BoundaryData,
    pub nodes: Vec<f64>,
    pub u_nodes: Vec<f64>,
}

const PRODUCT_GL: usize = 12;

impl IntervalSolver {
    pub fn new(p: &StableParams, a: f64, b: f64, q: &PotentialSpec, f: &BoundaryData, n_nodes: usize) -> Result<Self> {
        if p.d != 1 || p.alpha > 1.0 {
            return Err(Error::UnsupportedRegime("interval solver needs d = 1 and α ≤ 1".into()));
        }
        if !(a < b) || n_nodes < 4 {
            return Err(Error::InvalidParameter("need a < b and at least four nodes".into()));
        }
        let (lo, hi) = match q.support() {
            Some(ball) => ((ball.center[0] - ball.radius).max(a), (ball.center[0] + ball.radius).min(b)),
            None => (a, b),
        };
        let mut s = Self { p: *p, a, b, q: q.clone(), f: f.clone(), nodes: vec![], u_nodes: vec![] };
        if q.is_zero() || !(hi > lo) {
            return Ok(s);
        }
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        s.nodes = (0..=n_nodes).map(|j| mid - half * (PI * j as f64 / n_nodes as f64).cos()).collect();
        s.nodes[0] = lo;
        s.nodes[n_nodes] = hi;
        let m = s.nodes.len();
        let mut mat = DMatrix::<f64>::identity(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for i in 0..m {
            let w = s.weights(s.nodes[i]);
            for j in 0..m {
                mat[(i, j)] -= w[j];
            }
            rhs[i] = s.f.poisson_integral_1d(p, a, b, s.nodes[i])?;
        }
        let sol = mat.lu().solve(&rhs).ok_or(Error::ConvergenceFailure)?;
        s.u_nodes = sol.iter().copied().collect();
        // nonnegative data and potential force u ≥ Pf ≥ 0 exactly when (D, q) is gaugeable
        if f.nonnegative && q.is_nonnegative() && s.u_nodes.iter().zip(rhs.iter()).any(|(u, pf)| u < &(pf * (1.0 - 1e-9) - 1e-12)) {
            return Err(Error::InvalidParameter("potential is not gaugeable on this interval".into()));
        }
        Ok(s)
    }

    /// W_j(x) = ∫ G_D(x, y) q(y) φ_j(y) dy for the hat functions φ_j.
    fn weights(&self, x: f64) -> Vec<f64> {
        let m = self.nodes.len();
        let mut w = vec![0.0; m];
        let (gx, gw) = gauss_legendre(PRODUCT_GL);
        let kern = |y: f64| -> f64 {
            if y == x {
                return 0.0;
            }
            // offsets below the squared-distance underflow carry no mass
            let v = green_1d(&self.p, self.a, self.b, x, y).unwrap_or(0.0) * self.q.eval(&[y]);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        for c in 0..m - 1 {
            let (l, r) = (self.nodes[c], self.nodes[c + 1]);
            let len = r - l;
            let near = x > l - len && x < r + len;
            let edge = c == 0 || c == m - 2;
            if near || edge {
                let mut pieces = vec![(l, r)];
                if x > l && x < r {
                    pieces = vec![(l, x), (x, r)];
                }
                for (pl, pr) in pieces {
                    // left and right hats in one pass through offsets from the cell ends
                    let left = tanh_sinh(
                        |_, dl, dr| {
                            let y = if dl < dr { pl + dl } else { pr - dr };
                            kern(y) * (r - y) / len
                        },
                        pl,
                        pr,
                        1e-10,
                    );
                    let right = tanh_sinh(
                        |_, dl, dr| {
                            let y = if dl < dr { pl + dl } else { pr - dr };
                            kern(y) * (y - l) / len
                        },
                        pl,
                        pr,
                        1e-10,
                    );
                    w[c] += left.value;
                    w[c + 1] += right.value;
                }
            } else {
                for (t, wt) in gx.iter().zip(&gw) {
                    let y = 0.5 * (l + r) + 0.5 * len * t;
                    let k = 0.5 * len * wt * kern(y);
                    w[c] += k * (r - y) / len;
                    w[c + 1] += k * (y - l) / len;
                }
            }
        }
        w
    }

    /// u(x) for any real x; equals f outside the interval.
    pub fn eval(&self, x: f64) -> f64 {
        if !(x > self.a && x < self.b) {
            return self.f.eval(&[x]);
        }
        let pf = self.f.poisson_integral_1d(&self.p, self.a, self.b, x).unwrap_or(f64::NAN);
        if self.nodes.is_empty() {
            return pf;
        }
        let w = self.weights(x);
        pf + w.iter().zip(&self.u_nodes).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn delta(&self, x: f64) -> f64 {
        (x - self.a).min(self.b - x).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::expected_exit_time_ball;
    use proptest::prelude::*;

    fn cauchy() -> StableParams {
        StableParams::new(1, 1.0).unwrap()
    }

    #[test]
    fn zero_potential_gauge_is_one() {
        let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
        let e = gauge(&cauchy(), &dom, &PotentialSpec::zero(), &[0.2], &FkConfig::new(500, 0.01, 1)).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn gauge_sign_bounds() {
        let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
        let cfg = FkConfig::new(400, 0.01, 2);
        let neg = q_harmonic_paths(&cauchy(), &dom, &PotentialSpec::constant(-0.5), &BoundaryData::constant(1.0), &[vec![0.0]], &cfg).unwrap();
        assert!(neg.values.iter().all(|v| *v <= 1.0 && *v > 0.0));
        let q = PotentialSpec::critical(1.0 - 0.5, vec![0.0], 0.2).unwrap();
        let pos = q_harmonic_paths(&cauchy(), &dom, &q, &BoundaryData::constant(1.0), &[vec![0.0]], &cfg).unwrap();
        assert!(pos.values.iter().all(|v| *v >= 1.0));
    }

    #[test]
    fn q_harmonic_is_linear_in_data() {
        let p = StableParams::new(1, 0.5).unwrap();
        let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
        let q = PotentialSpec::cone(vec![0.0], 0.5, 0.8, 0.3).unwrap();
        let f1 = BoundaryData::slab_indicator(1.0, 3.0);
        let f2 = BoundaryData::constant(1.0);
        let f12 = BoundaryData::combination(vec![(2.0, f1.clone()), (-0.5, f2.clone())]);
        let cfg = FkConfig::new(300, 0.01, 3);
        let x = [vec![0.3]];
        let a = q_harmonic_paths(&p, &dom, &q, &f1, &x, &cfg).unwrap();
        let b = q_harmonic_paths(&p, &dom, &q, &f2, &x, &cfg).unwrap();
        let c = q_harmonic_paths(&p, &dom, &q, &f12, &x, &cfg).unwrap();
        for i in 0..cfg.n {
            assert!((c.values[i] - (2.0 * a.values[i] - 0.5 * b.values[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn green_quadrature_of_one_is_exit_time() {
        for &alpha in &[0.5, 1.0] {
            let p = StableParams::new(1, alpha).unwrap();
            let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
            let v = green_operator_apply(&p, &dom, &|_| 1.0, &[0.3], GreenMethod::Quadrature).unwrap().value();
            let e = expected_exit_time_ball(&p, &BallSpec::unit(1), &[0.3]);
            assert!((v - e).abs() < 1e-6 * e, "{v} vs {e}");
        }
        let p = StableParams::new(2, 1.0).unwrap();
        let b = BallSpec::unit(2);
        let v = green_operator_apply(&p, &DomainSpec::Ball(b.clone()), &|_| 1.0, &[0.2, -0.1], GreenMethod::Quadrature).unwrap().value();
        let e = expected_exit_time_ball(&p, &b, &[0.2, -0.1]);
        assert!((v - e).abs() < 1e-4 * e, "{v} vs {e}");
    }

    #[test]
    fn odd_integrand_vanishes_at_centre() {
        let p = StableParams::new(1, 0.5).unwrap();
        let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
        let v = green_operator_apply(&p, &dom, &|y| y[0].powi(3), &[0.0], GreenMethod::Quadrature).unwrap().value();
        assert!(v.abs() < 1e-12);
        assert!(matches!(
            green_operator_apply(&p, &DomainSpec::Box { lo: vec![0.0], hi: vec![1.0] }, &|_| 1.0, &[0.5], GreenMethod::Quadrature),
            Err(Error::UnsupportedQuadrature(_))
        ));
    }

    #[test]
    fn gradient_of_linear_function_is_exact() {
        let g = gradient_fd(&Deterministic(|x: &[f64]| 2.0 * x[0] - 3.0 * x[1]), &[0.1, 0.4], 0.01).unwrap();
        assert!((g.grad[0] - 2.0).abs() < 1e-12 && (g.grad[1] + 3.0).abs() < 1e-12);
        let p = cauchy();
        let b = BallSpec::unit(1);
        let g = gradient_fd(&Deterministic(|x: &[f64]| expected_exit_time_ball(&p, &b, x)), &[0.0], 1e-3).unwrap();
        assert!(g.grad[0].abs() < 1e-14);
    }

    #[test]
    fn pointwise_laplacian_needs_tail_model() {
        let p = StableParams::new(1, 0.5).unwrap();
        let u = GridFunction::sample(-1.0, 1.0, 64, Exterior::Unknown, |_| 1.0);
        assert_eq!(frac_laplacian_pointwise(&p, &u, 0.0, None, None), Err(Error::TailModelMissing));
        let u = GridFunction { exterior: Exterior::Constant(1.0), ..u };
        let v = frac_laplacian_pointwise(&p, &u, 0.1, None, None).unwrap();
        assert!(v.value.abs() < 1e-12);
    }

    #[test]
    fn nystrom_without_potential_is_harmonic_measure() {
        let p = StableParams::new(1, 0.5).unwrap();
        let s = IntervalSolver::new(&p, -1.0, 1.0, &PotentialSpec::zero(), &BoundaryData::constant(1.0), 16).unwrap();
        assert!((s.eval(0.3) - 1.0).abs() < 1e-14);
        let f = BoundaryData::slab_indicator(1.0, f64::INFINITY);
        let s = IntervalSolver::new(&p, -1.0, 1.0, &PotentialSpec::zero(), &f, 16).unwrap();
        // by symmetry the right half-line carries half the exit mass from the centre
        assert!((s.eval(0.0) - 0.5).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn declared_holder_data_hold(x in -1.0f64..1.0, y in -1.0f64..1.0, e in 0.1f64..2.5, eta in 0.1f64..1.0) {
            let pairs = vec![(vec![x], vec![y])];
            let q = PotentialSpec::ball_power(vec![0.1], 0.6, e, 1.3).unwrap();
            prop_assert!(q.holder_ratio(&pairs) <= 1.0 + 1e-12);
            let q = PotentialSpec::cone(vec![-0.2], 0.7, eta, 0.4).unwrap();
            prop_assert!(q.holder_ratio(&pairs) <= 1.0 + 1e-12);
            let q = PotentialSpec::gaussian(vec![0.3], 0.25, 2.0).unwrap();
            prop_assert!(q.holder_ratio(&pairs) <= 1.0 + 1e-12);
        }
    }
}
