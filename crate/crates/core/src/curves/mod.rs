//! Filament centerlines sampled uniformly in arc length, rigid placements
//! and the elementary rigid velocity fields.

mod distance;
mod interp;
mod parametric;
mod pose;
mod section;

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

pub use distance::{min_distance, point_curve_distance, segment_segment_distance};
pub use interp::ArcInterpolator;
pub use parametric::{ChordSpline, Parametrization, Placed, Preset};
pub use pose::{Pose, TwistVelocity, ROTATION_TOL};
pub use section::{CrossSectionSpec, SectionProfile};

use crate::quadrature::{corrected_trapezoid_weights, GaussLegendre};
use crate::{Error, Result, Vec3};

/// Default number of nodes per centerline.
pub const DEFAULT_NODES: usize = 256;
/// Minimum number of nodes accepted by the resamplers.
pub const MIN_NODES: usize = 8;

/// Centerline sampled at `n` nodes uniformly spaced in arc length.
///
/// Closed curves carry `n` distinct nodes with periodic indexing and
/// periodic-trapezoid weights `L/n`. Open curves carry both endpoints and
/// endpoint-corrected trapezoid weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub nodes: Vec<Vec3>,
    pub tangents: Vec<Vec3>,
    pub arc_weights: Vec<f64>,
    pub length: f64,
    pub closed: bool,
}

impl Curve {
    /// Build a curve from nodes that are already uniform in arc length.
    /// Tangents are obtained by differentiation of the nodes.
    pub fn from_uniform_nodes(nodes: Vec<Vec3>, length: f64, closed: bool) -> Result<Self> {
        let n = nodes.len();
        if n < MIN_NODES {
            return Err(Error::DegenerateInput(format!(
                "need at least {MIN_NODES} nodes, got {n}"
            )));
        }
        if !(length > 0.0) {
            return Err(Error::DegenerateInput("curve has zero length".into()));
        }
        let h = if closed {
            length / n as f64
        } else {
            length / (n - 1) as f64
        };
        let tangents = differentiate(&nodes, h, closed)
            .into_iter()
            .map(|d| {
                let m = d.norm();
                if m > 0.0 {
                    Ok(d / m)
                } else {
                    Err(Error::DegenerateInput("vanishing tangent".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let arc_weights = if closed {
            vec![h; n]
        } else {
            corrected_trapezoid_weights(n, h)
        };
        Ok(Self {
            nodes,
            tangents,
            arc_weights,
            length,
            closed,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Arc-length distance between consecutive nodes.
    pub fn spacing(&self) -> f64 {
        if self.closed {
            self.length / self.len() as f64
        } else {
            self.length / (self.len() - 1) as f64
        }
    }

    /// Arc-length coordinate of node `j`.
    pub fn arclength(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn interpolator(&self) -> ArcInterpolator {
        ArcInterpolator::new(self.len(), self.spacing(), self.length, self.closed)
    }

    /// `∮ x dH¹ / L`.
    pub fn barycenter(&self) -> Vec3 {
        self.nodes
            .iter()
            .zip(&self.arc_weights)
            .map(|(x, w)| x * *w)
            .sum::<Vec3>()
            / self.length
    }

    /// Curvature `|τ'(s)|` at the nodes.
    pub fn curvature(&self) -> Vec<f64> {
        differentiate(&self.tangents, self.spacing(), self.closed)
            .iter()
            .map(|d| d.norm())
            .collect()
    }

    pub fn max_curvature(&self) -> f64 {
        self.curvature().into_iter().fold(0.0, f64::max)
    }

    /// Rejects straight centerlines (max curvature `≤ 1e-8 / L`).
    pub fn ensure_not_straight(&self) -> Result<()> {
        let threshold = 1e-8 / self.length;
        let max_curvature = self.max_curvature();
        if max_curvature <= threshold {
            return Err(Error::StraightCurve {
                max_curvature,
                threshold,
            });
        }
        Ok(())
    }

    /// Polyline segments (closing segment included for closed curves).
    pub fn segments(&self) -> impl Iterator<Item = (Vec3, Vec3)> + '_ {
        let n = self.len();
        let m = if self.closed { n } else { n - 1 };
        (0..m).map(move |i| (self.nodes[i], self.nodes[(i + 1) % n]))
    }

    /// Largest deviation of consecutive chords from their mean, relative.
    pub fn spacing_nonuniformity(&self) -> f64 {
        let chords: Vec<f64> = self.segments().map(|(a, b)| (b - a).norm()).collect();
        let mean = chords.iter().sum::<f64>() / chords.len() as f64;
        chords
            .iter()
            .map(|c| (c - mean).abs() / mean)
            .fold(0.0, f64::max)
    }
}

/// First derivative of node data on a uniform grid of spacing `h`:
/// spectral for periodic data, fourth-order finite differences otherwise.
pub fn differentiate(values: &[Vec3], h: f64, closed: bool) -> Vec<Vec3> {
    if closed {
        spectral_derivative(values, h)
    } else {
        fd4_derivative(values, h)
    }
}

fn spectral_derivative(values: &[Vec3], h: f64) -> Vec<Vec3> {
    let n = values.len();
    let length = h * n as f64;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut out = vec![Vec3::zeros(); n];
    for c in 0..3 {
        let mut buf: Vec<Complex<f64>> = values.iter().map(|v| Complex::new(v[c], 0.0)).collect();
        fwd.process(&mut buf);
        for (k, z) in buf.iter_mut().enumerate() {
            let freq = if 2 * k < n {
                k as f64
            } else if 2 * k == n {
                0.0
            } else {
                k as f64 - n as f64
            };
            let ik = Complex::new(0.0, std::f64::consts::TAU * freq / length);
            *z *= ik / n as f64;
        }
        inv.process(&mut buf);
        for (o, z) in out.iter_mut().zip(&buf) {
            o[c] = z.re;
        }
    }
    out
}

fn fd4_derivative(f: &[Vec3], h: f64) -> Vec<Vec3> {
    let n = f.len();
    let mut d = vec![Vec3::zeros(); n];
    let s = 1.0 / (12.0 * h);
    d[0] = (f[0] * -25.0 + f[1] * 48.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) * s;
    d[1] = (f[0] * -3.0 - f[1] * 10.0 + f[2] * 18.0 - f[3] * 6.0 + f[4]) * s;
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - f[i - 1] * 8.0 + f[i + 1] * 8.0 - f[i + 2]) * s;
    }
    d[n - 2] = (f[n - 1] * 3.0 + f[n - 2] * 10.0 - f[n - 3] * 18.0 + f[n - 4] * 6.0 - f[n - 5]) * s;
    d[n - 1] = (f[n - 1] * 25.0 - f[n - 2] * 48.0 + f[n - 3] * 36.0 - f[n - 4] * 16.0
        + f[n - 5] * 3.0)
        * s;
    d
}

/// Resample a parametric curve at `n` nodes uniform in arc length.
pub fn resample_parametric<P: Parametrization + ?Sized>(param: &P, n: usize) -> Result<Curve> {
    if n < MIN_NODES {
        return Err(Error::DegenerateInput(format!(
            "need at least {MIN_NODES} nodes, got {n}"
        )));
    }
    let table = ArcLengthTable::new(param)?;
    let closed = param.closed();
    let length = table.total();
    let h = if closed {
        length / n as f64
    } else {
        length / (n - 1) as f64
    };
    let nodes = (0..n)
        .map(|j| {
            let s = if !closed && j == n - 1 {
                length
            } else {
                j as f64 * h
            };
            param.point(table.invert(param, s))
        })
        .collect();
    Curve::from_uniform_nodes(nodes, length, closed)
}

/// Resample an ordered list of samples at `n` nodes uniform in arc length.
///
/// A cubic spline through the samples (parametrized by cumulative chord)
/// is re-integrated for its arc length, then inverted at equispaced
/// arc-length targets.
pub fn resample_arclength(samples: &[Vec3], n: usize, closed: bool) -> Result<Curve> {
    let spline = ChordSpline::new(samples, closed)?;
    resample_parametric(&spline, n)
}

/// Cumulative arc length of a parametrization on a fine panel grid.
struct ArcLengthTable {
    gl: GaussLegendre,
    breaks: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ArcLengthTable {
    const PANELS: usize = 1024;

    fn new<P: Parametrization + ?Sized>(param: &P) -> Result<Self> {
        let gl = GaussLegendre::new(16);
        let breaks: Vec<f64> = (0..=Self::PANELS)
            .map(|k| k as f64 / Self::PANELS as f64)
            .collect();
        let mut cumulative = Vec::with_capacity(breaks.len());
        cumulative.push(0.0);
        let mut min_speed = f64::INFINITY;
        for w in breaks.windows(2) {
            let seg = gl.integrate(w[0], w[1], |t| {
                let sp = param.derivative(t).norm();
                min_speed = min_speed.min(sp);
                sp
            });
            cumulative.push(cumulative.last().unwrap() + seg);
        }
        let total = *cumulative.last().unwrap();
        if !(total > 0.0) || !total.is_finite() || !(min_speed > 1e-12 * total) {
            return Err(Error::DegenerateInput(
                "parametrization is singular (zero speed or zero length)".into(),
            ));
        }
        Ok(Self {
            gl,
            breaks,
            cumulative,
        })
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Parameter `t` with arc length `s` from `t = 0`.
    fn invert<P: Parametrization + ?Sized>(&self, param: &P, s: f64) -> f64 {
        let k = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => return self.breaks[i],
            Err(i) => (i - 1).min(self.breaks.len() - 2),
        };
        let (t0, t1) = (self.breaks[k], self.breaks[k + 1]);
        let (s0, s1) = (self.cumulative[k], self.cumulative[k + 1]);
        let target = s - s0;
        let (mut lo, mut hi) = (t0, t1);
        let mut t = t0 + (t1 - t0) * target / (s1 - s0);
        for _ in 0..50 {
            let g = self.gl.integrate(t0, t, |u| param.derivative(u).norm()) - target;
            if g > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let step = g / param.derivative(t).norm();
            let mut next = t - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() < 1e-16 {
                t = next;
                break;
            }
            t = next;
        }
        t
    }
}

/// Translate a curve so that its arc-length barycenter is the origin.
/// Returns the translated curve and the removed offset.
pub fn recenter(curve: &Curve) -> (Curve, Vec3) {
    let c = curve.barycenter();
    let mut out = curve.clone();
    for x in &mut out.nodes {
        *x -= c;
    }
    (out, c)
}

/// Rigidly place a (centered) reference curve: `x ↦ h + Q x`, `τ ↦ Q τ`.
pub fn place(curve: &Curve, pose: &Pose) -> Result<Curve> {
    pose.validate()?;
    Ok(place_unchecked(curve, pose))
}

pub(crate) fn place_unchecked(curve: &Curve, pose: &Pose) -> Curve {
    Curve {
        nodes: curve.nodes.iter().map(|x| pose.apply(x)).collect(),
        tangents: curve.tangents.iter().map(|t| pose.rotation * t).collect(),
        arc_weights: curve.arc_weights.clone(),
        length: curve.length,
        closed: curve.closed,
    }
}

/// Open curves: `γ([ε, L − ε])` resampled with the same node count.
/// Closed curves are returned unchanged.
pub fn cutoff_centerline(curve: &Curve, eps: f64) -> Result<Curve> {
    if !(eps >= 0.0) || 2.0 * eps >= curve.length * (1.0 - 1e-12) {
        return Err(Error::DegenerateInput(format!(
            "cut-off {eps} must satisfy 0 <= 2 eps < L = {}",
            curve.length
        )));
    }
    if curve.closed || eps == 0.0 {
        return Ok(curve.clone());
    }
    let sub = SubArc {
        nodes: Arc::new(curve.nodes.clone()),
        interp: curve.interpolator(),
        start: eps,
        span: curve.length - 2.0 * eps,
    };
    resample_parametric(&sub, curve.len())
}

struct SubArc {
    nodes: Arc<Vec<Vec3>>,
    interp: ArcInterpolator,
    start: f64,
    span: f64,
}

impl Parametrization for SubArc {
    fn point(&self, t: f64) -> Vec3 {
        self.interp.eval(&self.nodes, self.start + t * self.span)
    }
    fn derivative(&self, t: f64) -> Vec3 {
        self.interp
            .eval_with_derivative(&self.nodes, self.start + t * self.span)
            .1
            * self.span
    }
    fn closed(&self) -> bool {
        false
    }
}

/// Elementary rigid velocity `v_α[h](x)`: `e_α` for `α ∈ 1..=3`,
/// `e_{α−3} ∧ (x − h)` for `α ∈ 4..=6`.
pub fn rigid_velocity(alpha: usize, center: &Vec3, x: &Vec3) -> Result<Vec3> {
    match alpha {
        1..=3 => Ok(Vec3::ith(alpha - 1, 1.0)),
        4..=6 => Ok(Vec3::ith(alpha - 4, 1.0).cross(&(x - center))),
        _ => Err(Error::IndexOutOfRange {
            index: alpha,
            lo: 1,
            hi: 6,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn circle(n: usize) -> Curve {
        resample_parametric(&Preset::Circle { radius: 1.0 }, n).unwrap()
    }

    #[test]
    fn unit_circle_length_and_invariants() {
        let c = circle(64);
        assert!((c.length - TAU).abs() < 1e-4);
        assert!((c.length - TAU).abs() < 1e-12);
        assert!((c.arc_weights.iter().sum::<f64>() - c.length).abs() < 1e-10 * c.length);
        for t in &c.tangents {
            assert!((t.norm() - 1.0).abs() < 1e-12);
        }
        assert!(c.spacing_nonuniformity() < 0.01);
    }

    #[test]
    fn straight_segment() {
        let seg = Preset::Segment {
            start: [0.0; 3],
            end: [1.0, 0.0, 0.0],
        };
        let c = resample_parametric(&seg, 16).unwrap();
        assert!((c.length - 1.0).abs() < 1e-14);
        for t in &c.tangents {
            assert!((t - Vec3::x()).norm() < 1e-12);
        }
        assert!(matches!(
            c.ensure_not_straight(),
            Err(Error::StraightCurve { .. })
        ));
    }

    #[test]
    fn sample_route_from_dense_circle() {
        let samples: Vec<Vec3> = (0..200)
            .map(|k| Preset::Circle { radius: 1.0 }.point(k as f64 / 200.0))
            .collect();
        let c = resample_arclength(&samples, 64, true).unwrap();
        assert!((c.length - TAU).abs() < 1e-4);
        assert!(c.spacing_nonuniformity() < 0.01);
    }

    #[test]
    fn resample_rejects_degenerate_input() {
        let a = Vec3::zeros();
        assert!(matches!(
            resample_arclength(&[a, Vec3::x()], 16, false),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            resample_arclength(&[a, a, Vec3::x(), Vec3::y()], 16, false),
            Err(Error::DegenerateInput(_))
        ));
        assert!(resample_parametric(&Preset::Circle { radius: 1.0 }, 4).is_err());
    }

    #[test]
    fn recenter_offsets_and_idempotence() {
        let c0 = circle(64);
        let moved = place(&c0, &Pose::from_translation(Vec3::new(1.0, 2.0, 3.0))).unwrap();
        let (c, off) = recenter(&moved);
        assert!((off - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
        assert!(c.barycenter().norm() < 1e-12);
        let (c2, off2) = recenter(&c);
        assert!(off2.norm() < 1e-12);
        for (a, b) in c.nodes.iter().zip(&c2.nodes) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn recenter_open_arc() {
        let arc = resample_parametric(
            &Preset::CircularArc {
                radius: 1.0,
                angle: 2.0,
            },
            128,
        )
        .unwrap();
        let (c, _) = recenter(&arc);
        // independent oracle: dense midpoint rule on the exact arc
        let m = 200_000;
        let centroid: Vec3 = (0..m)
            .map(|k| {
                let a = 2.0 * (k as f64 + 0.5) / m as f64;
                Vec3::new(a.cos(), a.sin(), 0.0)
            })
            .sum::<Vec3>()
            / m as f64;
        let expected = Vec3::new(2f64.sin() / 2.0, (1.0 - 2f64.cos()) / 2.0, 0.0);
        assert!((centroid - expected).norm() < 1e-9);
        assert!(c.barycenter().norm() < 1e-10);
        let (_, off) = recenter(&arc);
        assert!((off - expected).norm() < 1e-8);
    }

    #[test]
    fn place_identity_translation_and_rejects_bad_pose() {
        let c = circle(32);
        assert_eq!(place(&c, &Pose::identity()).unwrap(), c);
        let t = place(&c, &Pose::from_translation(Vec3::new(0.0, 0.0, 5.0))).unwrap();
        for (a, b) in c.nodes.iter().zip(&t.nodes) {
            assert!((b - a - Vec3::new(0.0, 0.0, 5.0)).norm() < 1e-15);
        }
        assert_eq!(t.tangents, c.tangents);
        let bad = Pose {
            translation: Vec3::zeros(),
            rotation: crate::Mat3::identity() * 2.0,
        };
        assert!(matches!(place(&c, &bad), Err(Error::InvalidPose(_))));
    }

    #[test]
    fn place_rotated_xz_circle_matches_rotated_samples() {
        // circle in the xz-plane
        let xz = Pose::from_axis_angle(Vec3::zeros(), Vec3::x(), PI / 2.0);
        let raw = Placed {
            inner: &Preset::Circle { radius: 1.0 },
            pose: xz,
        };
        let c = resample_parametric(&raw, 128).unwrap();
        let rot = Pose::from_axis_angle(Vec3::zeros(), Vec3::z(), PI / 2.0);
        let placed = place(&c, &rot).unwrap();
        let composed = Pose {
            translation: Vec3::zeros(),
            rotation: rot.rotation * xz.rotation,
        };
        let oracle = resample_parametric(
            &Placed {
                inner: &Preset::Circle { radius: 1.0 },
                pose: composed,
            },
            128,
        )
        .unwrap();
        for (a, b) in placed.nodes.iter().zip(&oracle.nodes) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn cutoff_open_and_closed() {
        let c = circle(64);
        assert_eq!(cutoff_centerline(&c, 0.3).unwrap(), c);
        let seg = resample_parametric(
            &Preset::Segment {
                start: [0.0; 3],
                end: [1.0, 0.0, 0.0],
            },
            32,
        )
        .unwrap();
        let cut = cutoff_centerline(&seg, 0.1).unwrap();
        assert!((cut.length - 0.8).abs() < 1e-12);
        assert!((cut.nodes[0] - Vec3::new(0.1, 0.0, 0.0)).norm() < 1e-12);
        assert!(cutoff_centerline(&seg, 0.5).is_err());
        assert_eq!(cutoff_centerline(&seg, 0.0).unwrap(), seg);
    }

    #[test]
    fn cutoff_helix_length() {
        let h = resample_parametric(
            &Preset::HelixArc {
                radius: 1.0,
                pitch: 0.5,
                turns: 1.5,
            },
            256,
        )
        .unwrap();
        let cut = cutoff_centerline(&h, 0.01 * h.length).unwrap();
        // re-measure by dense chord sum along the interpolant of the cut curve
        let it = cut.interpolator();
        let m = 100_000;
        let chord: f64 = (0..m)
            .map(|k| {
                let a = it.eval(&cut.nodes, cut.length * k as f64 / m as f64);
                let b = it.eval(&cut.nodes, cut.length * (k + 1) as f64 / m as f64);
                (b - a).norm()
            })
            .sum();
        assert!((cut.length - 0.98 * h.length).abs() < 1e-6 * h.length);
        assert!((chord - 0.98 * h.length).abs() < 1e-6 * h.length);
    }

    #[test]
    fn rigid_velocity_cases() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(rigid_velocity(1, &Vec3::zeros(), &x).unwrap(), Vec3::x());
        assert!((rigid_velocity(6, &Vec3::zeros(), &x).unwrap() - Vec3::y()).norm() < 1e-15);
        let v = rigid_velocity(4, &Vec3::new(0.0, 0.0, 1.0), &Vec3::new(0.0, 2.0, 1.0)).unwrap();
        assert!((v - Vec3::new(0.0, 0.0, 2.0)).norm() < 1e-15);
        assert!(matches!(
            rigid_velocity(7, &Vec3::zeros(), &x),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(rigid_velocity(0, &Vec3::zeros(), &x).is_err());
    }

    #[test]
    fn curvature_of_circle_is_inverse_radius() {
        let c = resample_parametric(&Preset::Circle { radius: 2.0 }, 128).unwrap();
        for k in c.curvature() {
            assert!((k - 0.5).abs() < 1e-10);
        }
        assert!(c.ensure_not_straight().is_ok());
    }
}
