//! Dirichlet eigenproblem for Δ^{α/2} + q on an interval with zero exterior
//! condition, discretized by singular-integral collocation.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::feynman_kac::{frac_laplacian_pointwise, horizon_paths, Exterior, FkConfig, GridFunction, PotentialSpec};
use crate::kernels::StableParams;
use crate::stats::{linear_fit, McEstimate};
use crate::verification::InequalityReport;

/// Dense approximation of Δ^{α/2} on the m interior nodes a + jh, h = (b - a)/(m + 1).
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub p: StableParams,
    pub a: f64,
    pub b: f64,
    pub m: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

/// Weight of the node at lattice distance k ≥ 1, in units of h^{-α}.
///
/// The unit-step integrals of t^{-1-α} against the piecewise-linear hats, with
/// the |s| < h part replaced by the second difference.
fn lattice_weight(alpha: f64, k: usize) -> f64 {
    let f = |t: f64| -t.powf(-alpha) / alpha;
    let g = |t: f64| if alpha == 1.0 { t.ln() } else { t.powf(1.0 - alpha) / (1.0 - alpha) };
    let kf = k as f64;
    // hat of node k on the cell [k, k+1]
    let left = (kf + 1.0) * (f(kf + 1.0) - f(kf)) - (g(kf + 1.0) - g(kf));
    if k == 1 {
        return left + 1.0 / (2.0 - alpha);
    }
    // hat of node k on the cell [k-1, k]
    let right = (g(kf) - g(kf - 1.0)) - (kf - 1.0) * (f(kf) - f(kf - 1.0));
    left + right
}

pub fn build_discrete_frac_laplacian(p: &StableParams, a: f64, b: f64, m: usize) -> Result<DiscreteOperator> {
    if p.d != 1 {
        return Err(Error::UnsupportedRegime("the discrete operator is one-dimensional".into()));
    }
    if m < 16 || !(a < b) {
        return Err(Error::InvalidParameter(format!("need m ≥ 16 and a < b, got m = {m}")));
    }
    let alpha = p.alpha;
    let h = (b - a) / (m + 1) as f64;
    let scale = p.a_d_neg_alpha * h.powf(-alpha);
    let w: Vec<f64> = (0..m).map(|k| if k == 0 { 0.0 } else { scale * lattice_weight(alpha, k) }).collect();
    let diag = -2.0 * scale * (1.0 / (2.0 - alpha) + 1.0 / alpha);
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (0..m).map(|j| if i == j { diag } else { w[i.abs_diff(j)] }).collect())
        .collect();
    let matrix = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
    let nodes = (1..=m).map(|j| a + j as f64 * h).collect();
    Ok(DiscreteOperator { p: *p, a, b, m, h, nodes, matrix })
}

impl DiscreteOperator {
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (&self.matrix * nalgebra::DVector::from_column_slice(u)).iter().copied().collect()
    }

    /// Whitespace-separated rows, for debugging.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.m {
            let row: Vec<String> = (0..self.m).map(|j| format!("{:.17e}", self.matrix[(i, j)])).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    /// λ₁ ≤ λ₂ ≤ … for Δ^{α/2} φ + q φ = -λ φ.
    pub values: Vec<f64>,
    /// Normalized so that h Σ φ² = 1 and Σ φ > 0.
    pub vectors: Vec<Vec<f64>>,
    pub nodes: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub alpha: f64,
}

impl EigenResult {
    /// φ_n on the full grid a = x_0 < … < x_{m+1} = b, extended by zero.
    pub fn grid_function(&self, n: usize) -> GridFunction {
        let mut values = Vec::with_capacity(self.nodes.len() + 2);
        values.push(0.0);
        values.extend(&self.vectors[n]);
        values.push(0.0);
        GridFunction { a: self.a, b: self.b, values, exterior: Exterior::Constant(0.0) }
    }

    pub fn delta(&self, j: usize) -> f64 {
        (self.nodes[j] - self.a).min(self.b - self.nodes[j])
    }

    /// Central differences at the interior nodes.
    pub fn gradient(&self, n: usize) -> Vec<f64> {
        let v = &self.vectors[n];
        let m = v.len();
        (0..m)
            .map(|j| {
                let up = if j + 1 < m { v[j + 1] } else { 0.0 };
                let dn = if j > 0 { v[j - 1] } else { 0.0 };
                (up - dn) / (2.0 * self.h)
            })
            .collect()
    }
}

/// Smallest k eigenpairs of -(A + diag q).
pub fn eigenpairs(op: &DiscreteOperator, q: &PotentialSpec, k: usize) -> Result<EigenResult> {
    if k == 0 || k > op.m {
        return Err(Error::InvalidParameter(format!("k = {k} outside 1..={}", op.m)));
    }
    let mut mat = -op.matrix.clone();
    for (i, x) in op.nodes.iter().enumerate() {
        mat[(i, i)] -= q.eval(&[*x]);
    }
    let eig = SymmetricEigen::try_new(mat.clone(), 1e-15, 0).ok_or(Error::ConvergenceFailure)?;
    let mut order: Vec<usize> = (0..op.m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let lam = eig.eigenvalues[i];
        let col = eig.eigenvectors.column(i);
        let sign = if col.sum() < 0.0 { -1.0 } else { 1.0 };
        let scale = sign / (op.h.sqrt() * col.norm());
        let v: Vec<f64> = col.iter().map(|c| c * scale).collect();
        let resid = (&mat * nalgebra::DVector::from_column_slice(&v) - nalgebra::DVector::from_column_slice(&v) * lam).norm();
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if resid > 1e-8 * vnorm * lam.abs().max(1.0) * (op.m as f64).sqrt() {
            return Err(Error::ConvergenceFailure);
        }
        values.push(lam);
        vectors.push(v);
    }
    Ok(EigenResult { values, vectors, nodes: op.nodes.clone(), a: op.a, b: op.b, h: op.h, alpha: op.p.alpha })
}

/// Sup over the grid of |∇φ₁| (δ ∧ 1) / φ₁, or of |∇φ_n| (δ ∧ 1) / ‖φ_n‖_∞ for n ≥ 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenGradientProfile {
    pub sup_ratio: f64,
    pub sup_location: f64,
    /// min |∇φ₁| δ / φ₁ over nodes with δ < ε (n = 1 only).
    pub near_boundary_min: Option<f64>,
}

pub fn eigen_gradient_profile(eig: &EigenResult, n: usize, eps: f64) -> Result<EigenGradientProfile> {
    if n >= eig.vectors.len() {
        return Err(Error::InvalidParameter(format!("eigenvector {n} not computed")));
    }
    let v = &eig.vectors[n];
    let grad = eig.gradient(n);
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (mut sup, mut loc) = (0.0f64, f64::NAN);
    let mut near_min: Option<f64> = None;
    for j in 0..v.len() {
        let delta = eig.delta(j);
        let denom = if n == 0 { v[j] } else { vmax };
        if n == 0 && v[j] <= 0.0 {
            return Err(Error::InvalidParameter("principal eigenvector is not positive".into()));
        }
        let r = grad[j].abs() * delta.min(1.0) / denom;
        if r > sup {
            sup = r;
            loc = eig.nodes[j];
        }
        if n == 0 && delta < eps {
            let lower = grad[j].abs() * delta / v[j];
            near_min = Some(near_min.map_or(lower, |m: f64| m.min(lower)));
        }
    }
    Ok(EigenGradientProfile { sup_ratio: sup, sup_location: loc, near_boundary_min: near_min })
}

/// Refinement stability of the eigenfunction gradient ratio between two grids.
///
/// The reported ratio is the relative change of the sup ratio (and, for φ₁,
/// of the near-boundary minimum) divided by `max_variation`.
pub fn check_eigen_gradient(coarse: &EigenResult, fine: &EigenResult, n: usize, max_variation: f64) -> Result<InequalityReport> {
    let eps = 0.1 * (fine.b - fine.a);
    let pc = eigen_gradient_profile(coarse, n, eps)?;
    let pf = eigen_gradient_profile(fine, n, eps)?;
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE);
    let mut worst = rel(pc.sup_ratio, pf.sup_ratio);
    if let (Some(c), Some(f)) = (pc.near_boundary_min, pf.near_boundary_min) {
        worst = worst.max(rel(c, f));
        if !(f > 0.0) {
            worst = f64::INFINITY;
        }
    }
    let mut rep = InequalityReport::upper(
        &format!("eigenfunction gradient ratio, n = {}", n + 1),
        &format!("m = {} vs {}", coarse.nodes.len(), fine.nodes.len()),
        worst / max_variation,
        vec![pf.sup_location],
        0.0,
    );
    rep.extras.insert("sup_ratio_coarse".into(), pc.sup_ratio);
    rep.extras.insert("sup_ratio_fine".into(), pf.sup_ratio);
    if let Some(v) = pf.near_boundary_min {
        rep.extras.insert("near_boundary_min_fine".into(), v);
    }
    Ok(rep)
}

/// Pointwise residual Δ^{α/2}φ + qφ + λφ of a discrete eigenpair, with the
/// operator evaluated by quadrature on the interpolated eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongResidual {
    pub max_abs: f64,
    pub location: f64,
    pub nodes_checked: usize,
    pub m: usize,
}

/// Max residual over the nodes with δ ≥ `min_delta`, for the eigenpair `n`.
pub fn strong_residual(eig: &EigenResult, q: &PotentialSpec, n: usize, min_delta: f64) -> Result<StrongResidual> {
    if n >= eig.vectors.len() {
        return Err(Error::InvalidParameter(format!("eigenvector {n} not computed")));
    }
    let p = StableParams::new(1, eig.alpha)?;
    let u = eig.grid_function(n);
    let lam = eig.values[n];
    let (mut worst, mut loc, mut count) = (0.0f64, f64::NAN, 0);
    for (j, (&x, &phi)) in eig.nodes.iter().zip(&eig.vectors[n]).enumerate() {
        if eig.delta(j) < min_delta {
            continue;
        }
        let lap = frac_laplacian_pointwise(&p, &u, x, None, None)?.value;
        let r = (lap + q.eval(&[x]) * phi + lam * phi).abs();
        count += 1;
        if r > worst {
            worst = r;
            loc = x;
        }
    }
    if count == 0 {
        return Err(Error::InvalidParameter(format!("no node with δ ≥ {min_delta}")));
    }
    Ok(StrongResidual { max_abs: worst, location: loc, nodes_checked: count, m: eig.nodes.len() })
}

/// λ₁(s q₀) against the Monte Carlo gauge diagnostic along a scale sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeLambdaReport {
    pub s_star: f64,
    pub sweep: Vec<GaugeLambdaPoint>,
    /// Smallest scale classified divergent and largest classified stable.
    pub bracket: (f64, f64),
    pub consistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeLambdaPoint {
    pub s: f64,
    pub lambda1: f64,
    /// Monte Carlo estimate of the growth rate of e_q(T) on {τ > T}; it equals -λ₁ in law.
    pub growth: McEstimate,
    pub verdict: GaugeVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GaugeVerdict {
    Stable,
    Divergent,
    Undecided,
}

/// Scale s* at which λ₁(s q₀) = 0, by bisection on the discrete operator.
pub fn critical_scale(op: &DiscreteOperator, q0: &PotentialSpec) -> Result<f64> {
    let lam = |s: f64| eigenpairs(op, &q0.scaled(s), 1).map(|e| e.values[0]);
    let l0 = lam(0.0)?;
    if !(l0 > 0.0) {
        return Err(Error::InvalidParameter("λ₁ must be positive without potential".into()));
    }
    let mut hi = 1.0;
    while lam(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::ConvergenceFailure);
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if lam(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Growth rate of the truncated gauge from log E[e_q(T); τ > T] on dyadic horizons.
pub fn gauge_growth_rate(
    p: &StableParams,
    dom: &DomainSpec,
    q: &PotentialSpec,
    x: &[f64],
    horizons: &[f64],
    cfg: &FkConfig,
) -> Result<McEstimate> {
    let hp = horizon_paths(p, dom, q, x, horizons, cfg)?;
    let ests: Vec<McEstimate> = (0..horizons.len()).map(|k| hp.survivor_estimate(k)).collect();
    if ests.iter().any(|e| !(e.mean > 0.0)) {
        return Err(Error::NoiseDominated { diff: 0.0, stderr: f64::INFINITY });
    }
    let logs: Vec<f64> = ests.iter().map(|e| e.mean.ln()).collect();
    let fit = linear_fit(horizons, &logs);
    // delta-method error from the per-horizon relative errors, treated as independent
    let w = crate::stats::ols_slope_weights(horizons);
    let var: f64 = w.iter().zip(&ests).map(|(w, e)| (w * e.stderr / e.mean).powi(2)).sum();
    Ok(McEstimate { mean: fit.slope, stderr: var.sqrt(), n: cfg.n, seed: cfg.seed })
}

pub fn check_gauge_lambda_equivalence(
    op: &DiscreteOperator,
    q0: &PotentialSpec,
    scales: &[f64],
    x: &[f64],
    horizons: &[f64],
    cfg: &FkConfig,
) -> Result<GaugeLambdaReport> {
    let s_star = critical_scale(op, q0)?;
    let dom = DomainSpec::interval(op.a, op.b)?;
    let mut sweep = Vec::with_capacity(scales.len());
    for &s in scales {
        let q = q0.scaled(s);
        let lambda1 = eigenpairs(op, &q, 1)?.values[0];
        let growth = gauge_growth_rate(&op.p, &dom, &q, x, horizons, cfg)?;
        let verdict = if growth.mean + 2.0 * growth.stderr < 0.0 {
            GaugeVerdict::Stable
        } else if growth.mean - 2.0 * growth.stderr > 0.0 {
            GaugeVerdict::Divergent
        } else {
            GaugeVerdict::Undecided
        };
        sweep.push(GaugeLambdaPoint { s, lambda1, growth, verdict });
    }
    let stable_max = sweep.iter().filter(|p| p.verdict == GaugeVerdict::Stable).map(|p| p.s).fold(f64::NEG_INFINITY, f64::max);
    let divergent_min = sweep.iter().filter(|p| p.verdict == GaugeVerdict::Divergent).map(|p| p.s).fold(f64::INFINITY, f64::min);
    let consistent = sweep.iter().all(|p| match p.verdict {
        GaugeVerdict::Stable => p.lambda1 > 0.0,
        GaugeVerdict::Divergent => p.lambda1 < 0.0,
        GaugeVerdict::Undecided => (p.s / s_star - 1.0).abs() < 0.2,
    }) && stable_max < divergent_min;
    Ok(GaugeLambdaReport { s_star, sweep, bracket: (stable_max, divergent_min), consistent })
}
