use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("ball radius {radius} must be positive")));
        }
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("ball center must be a finite point".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn unit(d: usize) -> Self {
        Self { center: vec![0.0; d], radius: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist(x, &self.center) < self.radius
    }

    /// r² - |x - c|², positive exactly on the open ball.
    pub fn gap(&self, x: &[f64]) -> f64 {
        let s: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        self.radius * self.radius - s
    }
}

/// Reflection in the hyperplane `{y : y[axis] = offset}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionFrame {
    pub axis: usize,
    pub offset: f64,
}

impl ReflectionFrame {
    pub fn new(axis: usize, offset: f64) -> Self {
        Self { axis, offset }
    }

    pub fn reflect(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.reflect_in_place(&mut y);
        y
    }

    pub fn reflect_in_place(&self, x: &mut [f64]) {
        x[self.axis] = 2.0 * self.offset - x[self.axis];
    }

    /// Signed distance to the hyperplane, positive on the positive side.
    pub fn side(&self, x: &[f64]) -> f64 {
        x[self.axis] - self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Interval { a: f64, b: f64 },
    Ball(BallSpec),
    /// Axis-aligned box, used for truncated half-spaces.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    BallUnion { balls: Vec<BallSpec> },
    Whole { d: usize },
}

impl DomainSpec {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidParameter(format!("empty interval ({a}, {b})")));
        }
        Ok(DomainSpec::Interval { a, b })
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            DomainSpec::Ball(b) => b.dim(),
            DomainSpec::Box { lo, .. } => lo.len(),
            DomainSpec::BallUnion { balls } => balls.first().map_or(0, |b| b.dim()),
            DomainSpec::Whole { d } => *d,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, DomainSpec::Whole { .. })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::Interval { a, b } => x[0] > *a && x[0] < *b,
            DomainSpec::Ball(b) => b.contains(x),
            DomainSpec::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| v > l && v < h),
            DomainSpec::BallUnion { balls } => balls.iter().any(|b| b.contains(x)),
            DomainSpec::Whole { .. } => true,
        }
    }

    /// Distance to the boundary for interior points, 0 elsewhere.
    ///
    /// For a union of overlapping balls this is the largest single-ball
    /// clearance, a lower bound that is exact when the balls are disjoint.
    pub fn delta(&self, x: &[f64]) -> f64 {
        let v = match self {
            DomainSpec::Interval { a, b } => (x[0] - a).min(b - x[0]),
            DomainSpec::Ball(b) => b.radius - dist(x, &b.center),
            DomainSpec::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (v - l).min(h - v))
                .fold(f64::INFINITY, f64::min),
            DomainSpec::BallUnion { balls } => {
                balls.iter().map(|b| b.radius - dist(x, &b.center)).fold(f64::NEG_INFINITY, f64::max)
            }
            DomainSpec::Whole { .. } => f64::INFINITY,
        };
        v.max(0.0)
    }

    /// Radius of a ball around the origin containing the domain.
    pub fn outer_radius(&self) -> f64 {
        match self {
            DomainSpec::Interval { a, b } => a.abs().max(b.abs()),
            DomainSpec::Ball(b) => norm(&b.center) + b.radius,
            DomainSpec::Box { lo, hi } => {
                lo.iter().zip(hi).map(|(l, h)| l.abs().max(h.abs()).powi(2)).sum::<f64>().sqrt()
            }
            DomainSpec::BallUnion { balls } => balls.iter().map(|b| norm(&b.center) + b.radius).fold(0.0, f64::max),
            DomainSpec::Whole { .. } => f64::INFINITY,
        }
    }

    /// Whether the reflection maps the domain onto itself.
    pub fn is_symmetric(&self, frame: &ReflectionFrame) -> bool {
        const TOL: f64 = 1e-12;
        if frame.axis >= self.dim() {
            return false;
        }
        match self {
            DomainSpec::Interval { a, b } => (a + b - 2.0 * frame.offset).abs() <= TOL * (1.0 + a.abs() + b.abs()),
            DomainSpec::Ball(b) => (b.center[frame.axis] - frame.offset).abs() <= TOL * (1.0 + b.radius),
            DomainSpec::Box { lo, hi } => {
                let i = frame.axis;
                (lo[i] + hi[i] - 2.0 * frame.offset).abs() <= TOL * (1.0 + lo[i].abs() + hi[i].abs())
            }
            DomainSpec::BallUnion { balls } => balls.iter().all(|b| {
                let img = frame.reflect(&b.center);
                balls
                    .iter()
                    .any(|c| (c.radius - b.radius).abs() <= TOL * b.radius && dist(&c.center, &img) <= TOL * (1.0 + b.radius))
            }),
            DomainSpec::Whole { .. } => true,
        }
    }

    /// Intersection with the open positive half-space of the frame.
    pub fn contains_positive(&self, frame: &ReflectionFrame, x: &[f64]) -> bool {
        frame.side(x) > 0.0 && self.contains(x)
    }
}
