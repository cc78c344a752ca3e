//! Closed-form potential theory of the rotation-invariant α-stable process:
//! Riesz kernels, Green functions of balls and intervals, the free-space
//! reflection difference, the ball Poisson kernel and the ball exit time.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta, beta_reg};
use statrs::function::gamma::gamma;

use crate::domain::{dist, BallSpec, ReflectionFrame};
use crate::error::{Error, Result};

/// 𝒜(d, γ) = Γ((d-γ)/2) / (2^γ π^{d/2} |Γ(γ/2)|).
pub fn riesz_constant(d: usize, gamma_exp: f64) -> f64 {
    let d = d as f64;
    gamma((d - gamma_exp) / 2.0) / (2f64.powf(gamma_exp) * PI.powf(d / 2.0) * gamma(gamma_exp / 2.0).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub d: usize,
    pub alpha: f64,
    /// 𝒜(d, α); absent in the recurrent case d ≤ α.
    pub a_d_alpha: Option<f64>,
    /// 𝒜(d, -α), the constant of the pointwise fractional Laplacian.
    pub a_d_neg_alpha: f64,
}

impl StableParams {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} outside (0, 2)")));
        }
        let a_d_alpha = if (d as f64) > alpha { Some(riesz_constant(d, alpha)) } else { None };
        Ok(Self { d, alpha, a_d_alpha, a_d_neg_alpha: riesz_constant(d, -alpha) })
    }

    /// The verification harnesses are restricted to α ≤ 1.
    pub fn require_verifiable(&self) -> Result<()> {
        if self.alpha > 1.0 {
            return Err(Error::UnsupportedRegime(format!("alpha = {} > 1", self.alpha)));
        }
        Ok(())
    }

    pub fn is_log_case(&self) -> bool {
        self.d == 1 && self.alpha == 1.0
    }

    fn transient_constant(&self) -> Result<f64> {
        self.a_d_alpha
            .ok_or_else(|| Error::UnsupportedRegime(format!("d = {} <= alpha = {}", self.d, self.alpha)))
    }
}

/// Free-space potential kernel, compensated by a logarithm when d = α = 1.
pub fn riesz_kernel(p: &StableParams, x: &[f64], y: &[f64]) -> Result<f64> {
    let r = dist(x, y);
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    if p.is_log_case() {
        return Ok(-r.ln() / PI);
    }
    let a = p.transient_constant()?;
    Ok(a * r.powf(p.alpha - p.d as f64))
}

/// Green function of (-r, r) for the Cauchy process (d = α = 1).
///
/// Zero when either point lies outside the interval.
pub fn green_interval(r: f64, x: f64, y: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("interval radius {r} must be positive")));
    }
    if x == y {
        return Err(Error::CoincidentPoints);
    }
    if x.abs() >= r || y.abs() >= r {
        return Ok(0.0);
    }
    let (xs, ys) = (x / r, y / r);
    let dxy = xs - ys;
    let gx = (1.0 - xs) * (1.0 + xs);
    let gy = (1.0 - ys) * (1.0 + ys);
    let w = gx * gy / (dxy * dxy);
    Ok(w.sqrt().asinh() / PI)
}

fn ball_green_constant(d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    gamma(df / 2.0) / (2f64.powf(alpha) * PI.powf(df / 2.0) * gamma(alpha / 2.0).powi(2))
}

/// Green function of a ball, zero when either point lies outside.
pub fn green_ball(p: &StableParams, b: &BallSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    let r = dist(x, y);
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    if !b.contains(x) || !b.contains(y) {
        return Ok(0.0);
    }
    if p.is_log_case() {
        return green_interval(b.radius, x[0] - b.center[0], y[0] - b.center[0]);
    }
    p.transient_constant()?;
    let rad2 = b.radius * b.radius;
    let w = b.gap(x) * b.gap(y) / (rad2 * r * r);
    Ok(green_ball_profile(p.d, p.alpha, w) * r.powf(p.alpha - p.d as f64))
}

/// B(d,α) ∫₀^w s^{α/2-1}(1+s)^{-d/2} ds, the ball Green function at unit
/// separation as a function of the invariant w.
pub fn green_ball_profile(d: usize, alpha: f64, w: f64) -> f64 {
    let a = alpha / 2.0;
    let bb = (d as f64 - alpha) / 2.0;
    let t = 1.0 / (1.0 + 1.0 / w);
    ball_green_constant(d, alpha) * beta(a, bb) * beta_reg(a, bb, t)
}

/// ∇_x G_B(x, y) from the closed form, zero when either point lies outside.
pub fn green_ball_grad_x(p: &StableParams, b: &BallSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let r = dist(x, y);
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    if !b.contains(x) || !b.contains(y) {
        return Ok(vec![0.0; x.len()]);
    }
    if !p.is_log_case() {
        p.transient_constant()?;
    }
    let (gx, gy) = (b.gap(x), b.gap(y));
    let rad2 = b.radius * b.radius;
    let w = gx * gy / (rad2 * r * r);
    let a = p.alpha / 2.0;
    let d = p.d as f64;
    // d/dw of the profile
    let dprof = ball_green_constant(p.d, p.alpha) * w.powf(a - 1.0) * (1.0 + w).powf(-d / 2.0);
    let prof = if p.is_log_case() { w.sqrt().asinh() / PI } else { green_ball_profile(p.d, p.alpha, w) };
    let rp = r.powf(p.alpha - d);
    Ok(x
        .iter()
        .zip(y)
        .zip(&b.center)
        .map(|((xi, yi), ci)| {
            let dw = w * (-2.0 * (xi - ci) / gx - 2.0 * (xi - yi) / (r * r));
            dprof * dw * rp + prof * (p.alpha - d) * rp * (xi - yi) / (r * r)
        })
        .collect())
}

/// G(x, y) - G(x̂, y) for the free-space kernel, d > α.
///
/// `x` on the hyperplane gives 0; otherwise both points must lie strictly on
/// the positive side.
pub fn green_halfspace_diff(p: &StableParams, frame: &ReflectionFrame, x: &[f64], y: &[f64]) -> Result<f64> {
    let a = p.transient_constant()?;
    if x == y {
        return Err(Error::CoincidentPoints);
    }
    let sx = frame.side(x);
    if sx < 0.0 || frame.side(y) <= 0.0 {
        return Err(Error::WrongSide);
    }
    if sx == 0.0 {
        return Ok(0.0);
    }
    let beta_exp = p.d as f64 - p.alpha;
    let xh = frame.reflect(x);
    let q = dist(x, y);
    let ph = dist(&xh, y);
    let (qb, pb) = (q.powf(beta_exp), ph.powf(beta_exp));
    Ok(a * (pb - qb) / (qb * pb))
}

/// Upper bound (2 ∨ 2β)𝒜(d,α)|x - x̂| / (|x - y|^β |x̂ - y|) with β = d - α.
pub fn halfspace_diff_bound(p: &StableParams, frame: &ReflectionFrame, x: &[f64], y: &[f64]) -> Result<f64> {
    let a = p.transient_constant()?;
    let beta_exp = p.d as f64 - p.alpha;
    let xh = frame.reflect(x);
    let c = 2f64.max(2.0 * beta_exp) * a;
    Ok(c * dist(x, &xh) / (dist(x, y).powf(beta_exp) * dist(&xh, y)))
}

pub fn poisson_constant(d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    gamma(df / 2.0) * PI.powf(-df / 2.0 - 1.0) * (PI * alpha / 2.0).sin()
}

/// Density of the exit position from `b` started at `x`, evaluated at `z`.
pub fn poisson_kernel_ball(p: &StableParams, b: &BallSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    if !b.contains(x) {
        return Err(Error::OutOfDomain("starting point must lie in the ball".into()));
    }
    let outer = -b.gap(z);
    if !(outer > 0.0) {
        return Err(Error::OutOfDomain("target point must lie outside the closed ball".into()));
    }
    let ratio = b.gap(x) / outer;
    Ok(poisson_constant(p.d, p.alpha) * ratio.powf(p.alpha / 2.0) * dist(x, z).powi(-(p.d as i32)))
}

pub fn exit_time_constant(d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    gamma(df / 2.0) / (2f64.powf(alpha) * gamma(1.0 + alpha / 2.0) * gamma((df + alpha) / 2.0))
}

/// E^x τ_B, zero outside the ball.
pub fn expected_exit_time_ball(p: &StableParams, b: &BallSpec, x: &[f64]) -> f64 {
    let g = b.gap(x);
    if g <= 0.0 {
        return 0.0;
    }
    exit_time_constant(p.d, p.alpha) * g.powf(p.alpha / 2.0)
}

/// Gradient of [`expected_exit_time_ball`].
pub fn expected_exit_time_ball_grad(p: &StableParams, b: &BallSpec, x: &[f64]) -> Vec<f64> {
    let g = b.gap(x);
    if g <= 0.0 {
        return vec![0.0; x.len()];
    }
    let c = exit_time_constant(p.d, p.alpha) * (p.alpha / 2.0) * g.powf(p.alpha / 2.0 - 1.0);
    x.iter().zip(&b.center).map(|(xi, ci)| -2.0 * c * (xi - ci)).collect()
}

/// Green function of the interval (a, b) in d = 1, for any α ∈ (0, 1].
pub fn green_1d(p: &StableParams, a: f64, b: f64, x: f64, y: f64) -> Result<f64> {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    if p.is_log_case() {
        return green_interval(r, x - c, y - c);
    }
    green_ball(p, &BallSpec { center: vec![c], radius: r }, &[x], &[y])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{tanh_sinh, tanh_sinh_semi_infinite};
    use proptest::prelude::*;

    #[test]
    fn green_gradient_matches_finite_differences() {
        for &(d, alpha) in &[(1usize, 1.0), (1, 0.5), (3, 0.5), (2, 1.0)] {
            let p = StableParams::new(d, alpha).unwrap();
            let b = BallSpec::new(vec![0.1; d], 0.9).unwrap();
            let mut x = vec![0.1; d];
            x[0] = 0.35;
            let mut y = vec![0.0; d];
            y[0] = -0.3;
            let g = green_ball_grad_x(&p, &b, &x, &y).unwrap();
            for i in 0..d {
                let h = 1e-5;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (green_ball(&p, &b, &xp, &y).unwrap() - green_ball(&p, &b, &xm, &y).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "d={d} α={alpha} i={i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn gamma_reflection_is_accurate() {
        // Γ(x + 1) = xΓ(x) across the reflection branch
        let g = gamma(-0.25);
        assert!((g * -0.25 - gamma(0.75)).abs() < 1e-13);
        assert!((riesz_constant(1, -1.0) - 1.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn riesz_examples() {
        let p = StableParams::new(1, 0.5).unwrap();
        let v = riesz_kernel(&p, &[0.0], &[1.0]).unwrap();
        assert!((v - (2.0 * PI).powf(-0.5)).abs() < 1e-14);
        let p = StableParams::new(1, 1.0).unwrap();
        assert_eq!(riesz_kernel(&p, &[0.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(riesz_kernel(&p, &[0.2], &[0.2]), Err(Error::CoincidentPoints));
        let p = StableParams::new(1, 1.5).unwrap();
        assert!(matches!(riesz_kernel(&p, &[0.0], &[1.0]), Err(Error::UnsupportedRegime(_))));
    }

    #[test]
    fn riesz_matches_subordinated_heat_kernel() {
        // ∫₀^∞ (4πs)^{-d/2} e^{-ρ²/4s} s^{α/2-1}/Γ(α/2) ds
        for &(d, alpha, rho) in &[(2usize, 1.0, 2.0), (3, 0.5, 0.7), (1, 0.5, 1.3)] {
            let p = StableParams::new(d, alpha).unwrap();
            let df = d as f64;
            let q = tanh_sinh_semi_infinite(
                |s, _| (4.0 * PI * s).powf(-df / 2.0) * (-rho * rho / (4.0 * s)).exp() * s.powf(alpha / 2.0 - 1.0) / gamma(alpha / 2.0),
                0.0,
                1e-12,
            );
            let mut y = vec![0.0; d];
            y[d - 1] = rho;
            let k = riesz_kernel(&p, &vec![0.0; d], &y).unwrap();
            assert!((q.value - k).abs() < 1e-9 * k, "d={d} α={alpha}: {} vs {k}", q.value);
        }
    }

    #[test]
    fn green_interval_analytic_point() {
        let v = green_interval(1.0, 0.0, 0.5f64.sqrt()).unwrap();
        assert!((v - (1.0 + 2f64.sqrt()).ln() / PI).abs() < 1e-15);
        assert_eq!(green_interval(1.0, 1.0, 0.2).unwrap(), 0.0);
        let a = green_interval(2.0, 0.6, 1.4).unwrap();
        let b = green_interval(1.0, 0.3, 0.7).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn green_ball_profile_matches_quadrature() {
        for &(d, alpha) in &[(3usize, 0.5), (2, 1.0), (1, 0.5), (1, 0.2)] {
            for &w in &[1e-4, 0.3, 1.0, 7.0, 250.0] {
                let q = tanh_sinh(
                    |s, _, _| s.powf(alpha / 2.0 - 1.0) * (1.0 + s).powf(-(d as f64) / 2.0),
                    0.0,
                    w,
                    1e-13,
                );
                let expect = ball_green_constant(d, alpha) * q.value;
                let got = green_ball_profile(d, alpha, w);
                assert!((got - expect).abs() < 1e-10 * expect, "d={d} α={alpha} w={w}: {got} vs {expect}");
            }
            // w → ∞ recovers the free kernel
            let p = StableParams::new(d, alpha).unwrap();
            let far = green_ball_profile(d, alpha, 1e40);
            assert!((far - p.a_d_alpha.unwrap()).abs() < 1e-4 * far);
        }
    }

    #[test]
    fn green_ball_examples() {
        let p = StableParams::new(3, 0.5).unwrap();
        let b1 = BallSpec::unit(3);
        let b2 = BallSpec::new(vec![0.0; 3], 2.0).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let x = [0.09 * i as f64 - 0.4, 0.1, 0.0];
                let y = [0.0, 0.08 * j as f64 - 0.35, 0.2];
                let g = green_ball(&p, &b1, &x, &y).unwrap();
                let k = riesz_kernel(&p, &x, &y).unwrap();
                assert!(g > 0.0 && g <= k);
                let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
                let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
                let g2 = green_ball(&p, &b2, &x2, &y2).unwrap();
                assert!((g2 / g - 2f64.powf(-2.5)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn halfspace_diff_example() {
        let p = StableParams::new(3, 0.5).unwrap();
        let f = ReflectionFrame::new(2, 0.0);
        let x = [0.0, 0.0, 0.1];
        let y = [0.0, 0.0, 0.5];
        let a = p.a_d_alpha.unwrap();
        let expect = a * (0.6f64.powf(2.5) - 0.4f64.powf(2.5)) / (0.4f64.powf(2.5) * 0.6f64.powf(2.5));
        let v = green_halfspace_diff(&p, &f, &x, &y).unwrap();
        assert!((v - expect).abs() < 1e-13 * expect);
        let bound = 5.0 * a * 0.2 / (0.4f64.powf(2.5) * 0.6);
        assert!((halfspace_diff_bound(&p, &f, &x, &y).unwrap() - bound).abs() < 1e-12 * bound);
        assert!(v <= bound);
        assert_eq!(green_halfspace_diff(&p, &f, &[0.0, 0.0, 0.0], &y).unwrap(), 0.0);
        assert_eq!(green_halfspace_diff(&p, &f, &[0.0, 0.0, -0.1], &y), Err(Error::WrongSide));
    }

    #[test]
    fn poisson_kernel_normalised() {
        let p = StableParams::new(1, 0.5).unwrap();
        let b = BallSpec::unit(1);
        let right = tanh_sinh_semi_infinite(|z, _| poisson_kernel_ball(&p, &b, &[0.0], &[z]).unwrap_or(0.0), 1.0, 1e-12);
        let left = tanh_sinh_semi_infinite(|z, _| poisson_kernel_ball(&p, &b, &[0.0], &[-z]).unwrap_or(0.0), 1.0, 1e-12);
        assert!((right.value + left.value - 1.0).abs() < 1e-6, "{}", right.value + left.value);
        // off-centre start
        let p = StableParams::new(1, 1.0).unwrap();
        let x = [0.4];
        let right = tanh_sinh_semi_infinite(|z, _| poisson_kernel_ball(&p, &b, &x, &[z]).unwrap_or(0.0), 1.0, 1e-12);
        let left = tanh_sinh_semi_infinite(|z, _| poisson_kernel_ball(&p, &b, &x, &[-z]).unwrap_or(0.0), 1.0, 1e-12);
        assert!((right.value + left.value - 1.0).abs() < 1e-6);
        assert!(matches!(poisson_kernel_ball(&p, &b, &x, &[0.5]), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn exit_time_examples() {
        let p = StableParams::new(1, 1.0).unwrap();
        let b = BallSpec::unit(1);
        assert!((expected_exit_time_ball(&p, &b, &[0.0]) - 1.0).abs() < 1e-14);
        assert_eq!(expected_exit_time_ball_grad(&p, &b, &[0.0]), vec![0.0]);
        let p = StableParams::new(1, 0.5).unwrap();
        let r1 = expected_exit_time_ball(&p, &b, &[1.0 - 1e-6]) / 1e-6f64.powf(0.25);
        let r2 = expected_exit_time_ball(&p, &b, &[1.0 - 1e-8]) / 1e-8f64.powf(0.25);
        assert!((r1 / r2 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn exit_time_is_green_of_one() {
        // Green integral over the ball in d = 1 through tanh-sinh split at the pole.
        for &alpha in &[0.5, 0.8] {
            let p = StableParams::new(1, alpha).unwrap();
            let b = BallSpec::unit(1);
            for &x in &[0.0, 0.35, -0.8] {
                let f = |y: f64, _: f64, _: f64| green_ball(&p, &b, &[x], &[y]).unwrap_or(0.0);
                let v = tanh_sinh(f, -1.0, x, 1e-12).value + tanh_sinh(f, x, 1.0, 1e-12).value;
                let e = expected_exit_time_ball(&p, &b, &[x]);
                assert!((v - e).abs() < 1e-4 * e, "α={alpha} x={x}: {v} vs {e}");
            }
        }
    }

    proptest! {
        #[test]
        fn green_interval_symmetric_and_scale_free(x in -0.999f64..0.999, y in -0.999f64..0.999, r in 0.1f64..10.0) {
            prop_assume!((x - y).abs() > 1e-9);
            let a = green_interval(1.0, x, y).unwrap();
            let b = green_interval(1.0, y, x).unwrap();
            prop_assert_eq!(a, b);
            let s = green_interval(r, r * x, r * y).unwrap();
            prop_assert!((s - a).abs() <= 1e-12 * (1.0 + a));
        }

        #[test]
        fn green_ball_monotone_in_radius(x in prop::collection::vec(-0.5f64..0.5, 3), y in prop::collection::vec(-0.5f64..0.5, 3), r2 in 1.0f64..3.0) {
            let p = StableParams::new(3, 0.5).unwrap();
            prop_assume!(dist(&x, &y) > 1e-6);
            let g1 = green_ball(&p, &BallSpec::unit(3), &x, &y).unwrap();
            let g2 = green_ball(&p, &BallSpec::new(vec![0.0; 3], r2).unwrap(), &x, &y).unwrap();
            prop_assert!(g1 <= g2 * (1.0 + 1e-12));
            prop_assert!((g1 - green_ball(&p, &BallSpec::unit(3), &y, &x).unwrap()).abs() <= 1e-14 * g1);
        }

        #[test]
        fn green_ball_reflection_difference_nonnegative(x in (0.01f64..0.9), y in (0.01f64..0.9), t in -0.4f64..0.4) {
            let p = StableParams::new(2, 0.5).unwrap();
            let b = BallSpec::unit(2);
            let xp = [t, x * (1.0 - t * t).sqrt()];
            let yp = [-t, y * (1.0 - t * t).sqrt()];
            prop_assume!(dist(&xp, &yp) > 1e-6);
            let frame = ReflectionFrame::new(1, 0.0);
            let d = green_ball(&p, &b, &xp, &yp).unwrap() - green_ball(&p, &b, &frame.reflect(&xp), &yp).unwrap();
            prop_assert!(d >= -1e-14);
        }
    }
}
