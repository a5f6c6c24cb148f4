//! Parametric curve sources: analytic presets and cubic splines through
//! sample points. Every source is parametrized over `t ∈ [0, 1]`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

/// A curve `t ∈ [0, 1] ↦ γ(t)` with its derivative.
pub trait Parametrization: Sync {
    fn point(&self, t: f64) -> Vec3;
    fn derivative(&self, t: f64) -> Vec3;
    /// Periodic in `t` with period 1.
    fn closed(&self) -> bool;
}

/// Named analytic centerlines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    /// Circle of radius `radius` in the xy-plane, centered at the origin,
    /// starting at `(radius, 0, 0)`.
    Circle {
        #[serde(default = "one")]
        radius: f64,
    },
    /// Ellipse with semi-axes `a` (x) and `b` (y) in the xy-plane.
    Ellipse { a: f64, b: f64 },
    /// Trefoil knot `(sin t + 2 sin 2t, cos t − 2 cos 2t, −sin 3t)·scale`.
    Trefoil {
        #[serde(default = "one")]
        scale: f64,
    },
    /// Open helical arc about the z-axis.
    HelixArc {
        #[serde(default = "one")]
        radius: f64,
        pitch: f64,
        turns: f64,
    },
    /// Open circular arc of the given opening angle in the xy-plane.
    CircularArc {
        #[serde(default = "one")]
        radius: f64,
        angle: f64,
    },
    /// Straight segment (rejected by resistance assembly).
    Segment { start: [f64; 3], end: [f64; 3] },
}

fn one() -> f64 {
    1.0
}

impl Preset {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::DegenerateInput(m.to_string()));
        match *self {
            Preset::Circle { radius } if !(radius > 0.0) => bad("circle radius must be positive"),
            Preset::Ellipse { a, b } if !(a > 0.0 && b > 0.0) => {
                bad("ellipse semi-axes must be positive")
            }
            Preset::Trefoil { scale } if !(scale > 0.0) => bad("trefoil scale must be positive"),
            Preset::HelixArc { radius, turns, .. } if !(radius > 0.0 && turns > 0.0) => {
                bad("helix radius and turns must be positive")
            }
            Preset::CircularArc { radius, angle }
                if !(radius > 0.0 && angle > 0.0 && angle < TAU) =>
            {
                bad("arc needs positive radius and angle in (0, 2π)")
            }
            Preset::Segment { start, end } if start == end => bad("segment endpoints coincide"),
            _ => Ok(()),
        }
    }
}

impl Parametrization for Preset {
    fn point(&self, t: f64) -> Vec3 {
        match *self {
            Preset::Circle { radius } => {
                let a = TAU * t;
                Vec3::new(radius * a.cos(), radius * a.sin(), 0.0)
            }
            Preset::Ellipse { a, b } => {
                let s = TAU * t;
                Vec3::new(a * s.cos(), b * s.sin(), 0.0)
            }
            Preset::Trefoil { scale } => {
                let s = TAU * t;
                Vec3::new(
                    s.sin() + 2.0 * (2.0 * s).sin(),
                    s.cos() - 2.0 * (2.0 * s).cos(),
                    -(3.0 * s).sin(),
                ) * scale
            }
            Preset::HelixArc {
                radius,
                pitch,
                turns,
            } => {
                let s = TAU * turns * t;
                Vec3::new(radius * s.cos(), radius * s.sin(), pitch * turns * t)
            }
            Preset::CircularArc { radius, angle } => {
                let s = angle * t;
                Vec3::new(radius * s.cos(), radius * s.sin(), 0.0)
            }
            Preset::Segment { start, end } => {
                let (a, b) = (Vec3::from(start), Vec3::from(end));
                a + (b - a) * t
            }
        }
    }

    fn derivative(&self, t: f64) -> Vec3 {
        match *self {
            Preset::Circle { radius } => {
                let a = TAU * t;
                Vec3::new(-a.sin(), a.cos(), 0.0) * (radius * TAU)
            }
            Preset::Ellipse { a, b } => {
                let s = TAU * t;
                Vec3::new(-a * s.sin(), b * s.cos(), 0.0) * TAU
            }
            Preset::Trefoil { scale } => {
                let s = TAU * t;
                Vec3::new(
                    s.cos() + 4.0 * (2.0 * s).cos(),
                    -s.sin() + 4.0 * (2.0 * s).sin(),
                    -3.0 * (3.0 * s).cos(),
                ) * (scale * TAU)
            }
            Preset::HelixArc {
                radius,
                pitch,
                turns,
            } => {
                let w = TAU * turns;
                let s = w * t;
                Vec3::new(-radius * w * s.sin(), radius * w * s.cos(), pitch * turns)
            }
            Preset::CircularArc { radius, angle } => {
                let s = angle * t;
                Vec3::new(-s.sin(), s.cos(), 0.0) * (radius * angle)
            }
            Preset::Segment { start, end } => Vec3::from(end) - Vec3::from(start),
        }
    }

    fn closed(&self) -> bool {
        matches!(
            self,
            Preset::Circle { .. } | Preset::Ellipse { .. } | Preset::Trefoil { .. }
        )
    }
}

/// Parametrization moved by a rigid motion.
pub struct Placed<'a, P: ?Sized> {
    pub inner: &'a P,
    pub pose: crate::curves::Pose,
}

impl<P: Parametrization + ?Sized> Parametrization for Placed<'_, P> {
    fn point(&self, t: f64) -> Vec3 {
        self.pose.apply(&self.inner.point(t))
    }
    fn derivative(&self, t: f64) -> Vec3 {
        self.pose.rotation * self.inner.derivative(t)
    }
    fn closed(&self) -> bool {
        self.inner.closed()
    }
}

/// Interpolating cubic spline through sample points, parametrized by
/// cumulative chord length (natural ends when open, periodic when closed).
#[derive(Debug, Clone)]
pub struct ChordSpline {
    knots: Vec<f64>,
    points: Vec<Vec3>,
    second: Vec<Vec3>,
    closed: bool,
}

impl ChordSpline {
    pub fn new(samples: &[Vec3], closed: bool) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::DegenerateInput(format!(
                "need at least 3 samples, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(Error::DegenerateInput("non-finite sample".into()));
        }
        let mut points = samples.to_vec();
        if closed {
            // tolerate an explicitly repeated closing sample
            if (points[0] - points[points.len() - 1]).norm() == 0.0 {
                points.pop();
            }
            if points.len() < 3 {
                return Err(Error::DegenerateInput(
                    "need at least 3 distinct samples".into(),
                ));
            }
            points.push(points[0]);
        }
        let mut knots = Vec::with_capacity(points.len());
        knots.push(0.0);
        for w in points.windows(2) {
            let d = (w[1] - w[0]).norm();
            if d == 0.0 {
                return Err(Error::DegenerateInput(
                    "repeated consecutive sample (zero chord)".into(),
                ));
            }
            knots.push(knots.last().unwrap() + d);
        }
        let second = if closed {
            periodic_second_derivatives(&knots, &points)
        } else {
            natural_second_derivatives(&knots, &points)
        };
        Ok(Self {
            knots,
            points,
            second,
            closed,
        })
    }

    fn total(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    fn locate(&self, u: f64) -> usize {
        let m = self.knots.len() - 1;
        match self.knots.binary_search_by(|k| k.partial_cmp(&u).unwrap()) {
            Ok(i) => i.min(m - 1),
            Err(i) => i.saturating_sub(1).min(m - 1),
        }
    }

    fn param(&self, t: f64) -> f64 {
        let t = if self.closed {
            t.rem_euclid(1.0)
        } else {
            t.clamp(0.0, 1.0)
        };
        t * self.total()
    }
}

impl Parametrization for ChordSpline {
    fn point(&self, t: f64) -> Vec3 {
        let u = self.param(t);
        let i = self.locate(u);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - u) / h;
        let b = (u - self.knots[i]) / h;
        self.points[i] * a
            + self.points[i + 1] * b
            + (self.second[i] * (a * a * a - a) + self.second[i + 1] * (b * b * b - b))
                * (h * h / 6.0)
    }

    fn derivative(&self, t: f64) -> Vec3 {
        let u = self.param(t);
        let i = self.locate(u);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - u) / h;
        let b = (u - self.knots[i]) / h;
        let du = (self.points[i + 1] - self.points[i]) / h
            + (self.second[i + 1] * (3.0 * b * b - 1.0) - self.second[i] * (3.0 * a * a - 1.0))
                * (h / 6.0);
        du * self.total()
    }

    fn closed(&self) -> bool {
        self.closed
    }
}

fn natural_second_derivatives(knots: &[f64], pts: &[Vec3]) -> Vec<Vec3> {
    let n = pts.len();
    let mut sub = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![Vec3::zeros(); n];
    for i in 1..n - 1 {
        let h0 = knots[i] - knots[i - 1];
        let h1 = knots[i + 1] - knots[i];
        sub[i] = h0 / 6.0;
        diag[i] = (h0 + h1) / 3.0;
        sup[i] = h1 / 6.0;
        rhs[i] = (pts[i + 1] - pts[i]) / h1 - (pts[i] - pts[i - 1]) / h0;
    }
    thomas(&sub, &diag, &sup, rhs)
}

/// Periodic spline: `pts[0] == pts[m]`, unknowns `M_0..M_{m-1}`.
fn periodic_second_derivatives(knots: &[f64], pts: &[Vec3]) -> Vec<Vec3> {
    let m = pts.len() - 1;
    let h = |i: usize| knots[i + 1] - knots[i];
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    let mut rhs = vec![Vec3::zeros(); m];
    for i in 0..m {
        let ip = (i + m - 1) % m;
        let h0 = h(ip);
        let h1 = h(i);
        sub[i] = h0 / 6.0;
        diag[i] = (h0 + h1) / 3.0;
        sup[i] = h1 / 6.0;
        rhs[i] = (pts[i + 1] - pts[i]) / h1 - (pts[ip + 1] - pts[ip]) / h0;
    }
    let mut out = cyclic_thomas(&sub, &diag, &sup, rhs);
    out.push(out[0]);
    out
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], mut rhs: Vec<Vec3>) -> Vec<Vec3> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = diag[0];
    c[0] = sup[0] / d;
    rhs[0] /= d;
    for i in 1..n {
        d = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / d;
        rhs[i] = (rhs[i] - rhs[i - 1] * sub[i]) / d;
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - rhs[i + 1] * c[i];
    }
    rhs
}

/// Cyclic tridiagonal solve (corner entries `sub[0]`, `sup[n-1]`) by
/// the Sherman–Morrison correction.
fn cyclic_thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: Vec<Vec3>) -> Vec<Vec3> {
    let n = diag.len();
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let x = thomas(sub, &bb, sup, rhs);
    let mut u = vec![Vec3::zeros(); n];
    u[0] = Vec3::repeat(gamma);
    u[n - 1] = Vec3::repeat(alpha);
    let z = thomas(sub, &bb, sup, u);
    let fact = (x[0] + x[n - 1] * (beta / gamma))
        .component_div(&(Vec3::repeat(1.0) + z[0] + z[n - 1] * (beta / gamma)));
    x.iter()
        .zip(&z)
        .map(|(xi, zi)| xi - zi.component_mul(&fact))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_derivatives_match_finite_differences() {
        let presets = [
            Preset::Circle { radius: 1.5 },
            Preset::Ellipse { a: 2.0, b: 0.5 },
            Preset::Trefoil { scale: 1.0 },
            Preset::HelixArc {
                radius: 1.0,
                pitch: 0.7,
                turns: 1.3,
            },
            Preset::CircularArc {
                radius: 2.0,
                angle: 2.0,
            },
        ];
        let h = 1e-6;
        for p in &presets {
            for t in [0.1, 0.37, 0.8] {
                let fd = (p.point(t + h) - p.point(t - h)) / (2.0 * h);
                assert!(
                    (fd - p.derivative(t)).norm() < 1e-6 * p.derivative(t).norm(),
                    "{p:?}"
                );
            }
        }
    }

    #[test]
    fn periodic_spline_interpolates_and_is_smooth_across_seam() {
        let pts: Vec<Vec3> = (0..40)
            .map(|k| Preset::Ellipse { a: 2.0, b: 1.0 }.point(k as f64 / 40.0))
            .collect();
        let s = ChordSpline::new(&pts, true).unwrap();
        for (k, p) in pts.iter().enumerate() {
            let t = s.knots[k] / s.total();
            assert!((s.point(t) - p).norm() < 1e-12);
        }
        let d0 = s.derivative(1e-12);
        let d1 = s.derivative(1.0 - 1e-12);
        assert!((d0 - d1).norm() < 1e-6 * d0.norm());
    }

    #[test]
    fn spline_rejects_degenerate_samples() {
        let a = Vec3::zeros();
        let b = Vec3::x();
        assert!(ChordSpline::new(&[a, b], false).is_err());
        assert!(ChordSpline::new(&[a, b, b, Vec3::y()], false).is_err());
    }
}
