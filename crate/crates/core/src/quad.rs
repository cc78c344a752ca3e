//! One-dimensional quadrature used throughout the kernel and operator code.
//!
//! Most integrands here carry algebraic or logarithmic singularities at the
//! interval endpoints (Green kernels at the pole, Poisson kernels at the
//! sphere). The tanh-sinh rule handles those natively as long as the integrand
//! can be evaluated from the *offsets* to each endpoint rather than from the
//! abscissa itself, so that `y - a` never suffers cancellation. The integrand
//! callbacks therefore receive `(y, y - a, b - y)`.

use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

const TS_UMAX: f64 = 6.0;
const TS_MAX_LEVEL: u32 = 10;

/// Tanh-sinh (double exponential) quadrature on `[a, b]`.
///
/// `f(y, y - a, b - y)` must be finite on the open interval.
pub fn tanh_sinh<F>(mut f: F, a: f64, b: f64, rel_tol: f64) -> QuadResult
where
    F: FnMut(f64, f64, f64) -> f64,
{
    if b == a {
        return QuadResult { value: 0.0, error: 0.0 };
    }
    if b < a {
        let r = tanh_sinh_ordered(&mut |y, da, db| f(y, db, da), b, a, rel_tol);
        return QuadResult { value: -r.value, error: r.error };
    }
    tanh_sinh_ordered(&mut f, a, b, rel_tol)
}

fn tanh_sinh_ordered(f: &mut dyn FnMut(f64, f64, f64) -> f64, a: f64, b: f64, rel_tol: f64) -> QuadResult {
    let half = 0.5 * (b - a);
    let mid = a + half;
    let centre = FRAC_PI_2 * f(mid, half, half);
    let mut eval_pair = |u: f64| -> f64 {
        let s = FRAC_PI_2 * u.sinh();
        let e = (-2.0 * s).exp();
        let om = 2.0 * e / (1.0 + e);
        let op = 2.0 / (1.0 + e);
        let w = FRAC_PI_2 * u.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        let near = half * om;
        if near == 0.0 || w == 0.0 {
            return 0.0;
        }
        let far = half * op;
        let right = f(b - near, far, near);
        let left = f(a + near, near, far);
        w * (right + left)
    };

    let mut sum = centre;
    let mut k = 1;
    while (k as f64) <= TS_UMAX {
        sum += eval_pair(k as f64);
        k += 1;
    }
    let mut h = 1.0;
    let mut prev = h * half * sum;
    let mut err = f64::INFINITY;
    for level in 1..=TS_MAX_LEVEL {
        h *= 0.5;
        let mut u = h;
        while u <= TS_UMAX {
            sum += eval_pair(u);
            u += 2.0 * h;
        }
        let cur = h * half * sum;
        err = (cur - prev).abs();
        prev = cur;
        if level >= 3 && err <= rel_tol * cur.abs().max(1e-300) {
            break;
        }
    }
    QuadResult { value: prev, error: err }
}

/// Tanh-sinh over `[a, ∞)` through `y = a + t / (1 - t)`.
///
/// `f(y, y - a)` receives the exact offset from the finite endpoint.
pub fn tanh_sinh_semi_infinite<F>(mut f: F, a: f64, rel_tol: f64) -> QuadResult
where
    F: FnMut(f64, f64) -> f64,
{
    tanh_sinh(
        |_, t, one_minus_t| {
            let off = t / one_minus_t;
            let jac = 1.0 / (one_minus_t * one_minus_t);
            if !off.is_finite() || !jac.is_finite() {
                return 0.0;
            }
            let v = f(a + off, off) * jac;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        rel_tol,
    )
}

/// Integrate over `[a, b]` splitting at every interior breakpoint.
pub fn tanh_sinh_pieces<F>(mut f: F, a: f64, b: f64, breaks: &[f64], rel_tol: f64) -> QuadResult
where
    F: FnMut(f64, f64, f64) -> f64,
{
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&p| p > a && p < b).collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let mut edges = Vec::with_capacity(pts.len() + 2);
    edges.push(a);
    edges.extend(pts);
    edges.push(b);
    let mut total = QuadResult { value: 0.0, error: 0.0 };
    for w in edges.windows(2) {
        let r = tanh_sinh(&mut f, w[0], w[1], rel_tol);
        total.value += r.value;
        total.error += r.error;
    }
    total
}

// Gauss-Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, (rk - rg).abs() * h)
}

/// Adaptive Gauss-Kronrod for integrands that are smooth on `[a, b]`.
pub fn gauss_kronrod<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, error: 0.0 };
    }
    let (whole, err0) = gk15(&mut f, a, b);
    let tol = (rel_tol * whole.abs()).max(abs_tol);
    if err0 <= tol {
        return QuadResult { value: whole, error: err0 };
    }
    let mut stack = vec![(a, b, tol, 0u32)];
    let mut value = 0.0;
    let mut error = 0.0;
    while let Some((lo, hi, t, depth)) = stack.pop() {
        let (v, e) = gk15(&mut f, lo, hi);
        if e <= t || depth >= 40 || (hi - lo).abs() < 1e-15 * (1.0 + lo.abs()) {
            value += v;
            error += e;
        } else {
            let m = 0.5 * (lo + hi);
            stack.push((lo, m, 0.5 * t, depth + 1));
            stack.push((m, hi, 0.5 * t, depth + 1));
        }
    }
    QuadResult { value, error }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}
