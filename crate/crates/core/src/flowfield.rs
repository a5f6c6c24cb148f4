//! Leading-order perturbation flow generated by line force densities.
//!
//! `U_C[v](x) = ½ ∮ S(x − y) k(τ(y)) v(y) dH¹(y)` and the matching pressure
//! with kernel `P`. Node quadrature is used away from the curve; within
//! [`NEAR_FACTOR`] node spacings the integral is recomputed with adaptive
//! Gauss–Legendre panels on the local interpolant of the curve.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::curves::{place_unchecked, point_curve_distance, Curve, TwistVelocity};
use crate::dynamics::SystemState;
use crate::flows::BackgroundFlow;
use crate::kernels::{drag_matrix, oseen_unchecked};
use crate::quadrature::GaussLegendre;
use crate::{par, Error, Mat3, Result, Vec3};

/// Adaptive quadrature is used when `dist(x, C) < NEAR_FACTOR · spacing`.
pub const NEAR_FACTOR: f64 = 5.0;
/// Relative tolerance of the adaptive panel quadrature.
pub const ADAPTIVE_TOL: f64 = 1e-8;
/// Maximal bisection depth per panel.
pub const MAX_LEVELS: usize = 12;
/// Default grid exclusion radius in node spacings.
pub const EXCLUSION_FACTOR: f64 = 3.0;

/// Line force density `f = ½ k(τ) v` sampled at the nodes of `curve`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineMeasureDensity {
    pub curve: Curve,
    pub density: Vec<Vec3>,
}

impl LineMeasureDensity {
    pub fn new(curve: &Curve, v: &[Vec3]) -> Result<Self> {
        if v.len() != curve.len() {
            return Err(Error::LengthMismatch {
                expected: curve.len(),
                got: v.len(),
            });
        }
        let density: Vec<Vec3> = curve
            .tangents
            .iter()
            .zip(v)
            .map(|(t, v)| drag_matrix(t) * v * 0.5)
            .collect();
        if density.iter().any(|f| !f.iter().all(|x| x.is_finite())) {
            return Err(Error::DegenerateInput("non-finite line density".into()));
        }
        Ok(Self {
            curve: curve.clone(),
            density,
        })
    }

    /// Density of `v^S − u♭` for a placed curve moving with `twist` about `center`.
    pub fn from_twist(
        curve: &Curve,
        center: &Vec3,
        twist: &TwistVelocity,
        flow: &dyn BackgroundFlow,
        t: f64,
    ) -> Result<Self> {
        let v: Vec<Vec3> = curve
            .nodes
            .iter()
            .map(|x| twist.velocity_at(center, x) - flow.velocity(t, x))
            .collect();
        Self::new(curve, &v)
    }

    pub fn velocity(&self, x: &Vec3) -> Result<Vec3> {
        self.evaluate(x).map(|(u, _)| u)
    }

    pub fn pressure(&self, x: &Vec3) -> Result<f64> {
        self.evaluate(x).map(|(_, p)| p)
    }

    /// Velocity and pressure at `x`.
    pub fn evaluate(&self, x: &Vec3) -> Result<(Vec3, f64)> {
        let d = point_curve_distance(&self.curve, x);
        if !(d >= 1e-12 * self.curve.length) {
            return Err(Error::SingularPoint(d));
        }
        if d >= NEAR_FACTOR * self.curve.spacing() {
            let mut u = Vec3::zeros();
            let mut p = 0.0;
            for ((y, f), w) in self
                .curve
                .nodes
                .iter()
                .zip(&self.density)
                .zip(&self.curve.arc_weights)
            {
                let (du, dp) = kernel_pair(x, y, f);
                u += du * *w;
                p += dp * w;
            }
            Ok((u, p))
        } else {
            Ok(self.adaptive(x))
        }
    }

    fn adaptive(&self, x: &Vec3) -> (Vec3, f64) {
        let interp = self.curve.interpolator();
        let rule = GaussLegendre::new(16);
        let h = self.curve.spacing();
        let panels = if self.curve.closed {
            self.curve.len()
        } else {
            self.curve.len() - 1
        };
        let integrand = |s: f64| -> [f64; 4] {
            let y = interp.eval(&self.curve.nodes, s);
            let f = interp.eval(&self.density, s);
            let (u, p) = kernel_pair(x, &y, &f);
            [u.x, u.y, u.z, p]
        };
        let gl = |a: f64, b: f64| -> [f64; 4] {
            let mut acc = [0.0; 4];
            for (s, w) in rule.mapped(a, b) {
                let v = integrand(s);
                for k in 0..4 {
                    acc[k] += w * v[k];
                }
            }
            acc
        };
        let coarse: Vec<[f64; 4]> = (0..panels)
            .map(|i| gl(i as f64 * h, (i + 1) as f64 * h))
            .collect();
        let scale = coarse.iter().fold([0.0; 4], |a, v| {
            [a[0] + v[0], a[1] + v[1], a[2] + v[2], a[3] + v[3]]
        });
        let scale =
            (scale[0].powi(2) + scale[1].powi(2) + scale[2].powi(2)).sqrt() + scale[3].abs();
        let tol = ADAPTIVE_TOL * scale.max(f64::MIN_POSITIVE);
        let mut total = [0.0; 4];
        for (i, c) in coarse.iter().enumerate() {
            let a = i as f64 * h;
            let b = a + h;
            let mid = interp.eval(&self.curve.nodes, 0.5 * (a + b));
            let v = if (mid - x).norm() < 3.0 * h {
                refine(&gl, a, b, *c, tol, 0)
            } else {
                *c
            };
            for k in 0..4 {
                total[k] += v[k];
            }
        }
        (Vec3::new(total[0], total[1], total[2]), total[3])
    }
}

fn refine<F: Fn(f64, f64) -> [f64; 4]>(
    gl: &F,
    a: f64,
    b: f64,
    whole: [f64; 4],
    tol: f64,
    level: usize,
) -> [f64; 4] {
    let m = 0.5 * (a + b);
    let left = gl(a, m);
    let right = gl(m, b);
    let mut sum = [0.0; 4];
    let mut err: f64 = 0.0;
    for k in 0..4 {
        sum[k] = left[k] + right[k];
        err = err.max((sum[k] - whole[k]).abs());
    }
    if err <= tol || level + 1 >= MAX_LEVELS {
        return sum;
    }
    let l = refine(gl, a, m, left, 0.5 * tol, level + 1);
    let r = refine(gl, m, b, right, 0.5 * tol, level + 1);
    [l[0] + r[0], l[1] + r[1], l[2] + r[2], l[3] + r[3]]
}

#[inline]
fn kernel_pair(x: &Vec3, y: &Vec3, f: &Vec3) -> (Vec3, f64) {
    let r = x - y;
    let d = r.norm();
    let u = oseen_unchecked(&r, d) * f;
    let p = r.dot(f) / (4.0 * std::f64::consts::PI * d * d * d);
    (u, p)
}

/// `½ ∮ S(x − y) k(τ) v dH¹(y)`.
pub fn line_velocity(curve: &Curve, v: &[Vec3], x: &Vec3) -> Result<Vec3> {
    LineMeasureDensity::new(curve, v)?.velocity(x)
}

/// `½ ∮ P(x − y) · k(τ) v dH¹(y)`.
pub fn line_pressure(curve: &Curve, v: &[Vec3], x: &Vec3) -> Result<f64> {
    LineMeasureDensity::new(curve, v)?.pressure(x)
}

/// Total mass `∮ dμ` of the line force density.
pub fn total_line_force(density: &LineMeasureDensity) -> Vec3 {
    density
        .density
        .iter()
        .zip(&density.curve.arc_weights)
        .map(|(f, w)| f * *w)
        .sum()
}

/// Regular grid `origin + spacing · (i, j, k)`, `0 ≤ i < dims[0]`, etc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::Config("grid spacing must be positive".into()));
        }
        if self.dims.contains(&0) {
            return Err(Error::Config("grid dims must be ≥ 1".into()));
        }
        if self.origin.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        Ok(())
    }

    /// Cube of `n³` points of side `2 · half_width` centered at `center`.
    pub fn cube(center: Vec3, half_width: f64, n: usize) -> Self {
        let spacing = if n > 1 {
            2.0 * half_width / (n - 1) as f64
        } else {
            2.0 * half_width
        };
        Self {
            origin: (center - Vec3::repeat(half_width)).into(),
            spacing,
            dims: [n, n, n],
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index with `i` fastest.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::from(self.origin) + Vec3::new(i as f64, j as f64, k as f64) * self.spacing
    }

    fn point_linear(&self, idx: usize) -> Vec3 {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        self.point(i, j, k)
    }
}

/// Sampled perturbation velocity and pressure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldGrid {
    pub origin: Vec3,
    pub spacing: f64,
    pub dims: [usize; 3],
    pub velocity: Vec<Vec3>,
    pub pressure: Vec<f64>,
    /// `true` within the exclusion radius of a curve (values are zero).
    pub mask: Vec<bool>,
}

impl FieldGrid {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            origin: self.origin.into(),
            spacing: self.spacing,
            dims: self.dims,
        }
    }

    /// Samples `u` on the grid with an empty mask.
    pub fn from_fn(spec: &GridSpec, mut u: impl FnMut(&Vec3) -> (Vec3, f64)) -> Result<Self> {
        spec.validate()?;
        let (velocity, pressure) = (0..spec.len()).map(|i| u(&spec.point_linear(i))).unzip();
        Ok(Self {
            origin: spec.origin.into(),
            spacing: spec.spacing,
            dims: spec.dims,
            velocity,
            pressure,
            mask: vec![false; spec.len()],
        })
    }

    /// Legacy VTK structured-points file with velocity, pressure and mask.
    pub fn write_vtk<W: Write>(&self, mut out: W) -> Result<()> {
        let [nx, ny, nz] = self.dims;
        writeln!(out, "# vtk DataFile Version 3.0")?;
        writeln!(out, "filstokes perturbation field")?;
        writeln!(out, "ASCII")?;
        writeln!(out, "DATASET STRUCTURED_POINTS")?;
        writeln!(out, "DIMENSIONS {nx} {ny} {nz}")?;
        writeln!(
            out,
            "ORIGIN {:e} {:e} {:e}",
            self.origin.x, self.origin.y, self.origin.z
        )?;
        writeln!(
            out,
            "SPACING {:e} {:e} {:e}",
            self.spacing, self.spacing, self.spacing
        )?;
        writeln!(out, "POINT_DATA {}", self.velocity.len())?;
        writeln!(out, "VECTORS velocity double")?;
        for u in &self.velocity {
            writeln!(out, "{:.12e} {:.12e} {:.12e}", u.x, u.y, u.z)?;
        }
        writeln!(out, "SCALARS pressure double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for p in &self.pressure {
            writeln!(out, "{p:.12e}")?;
        }
        writeln!(out, "SCALARS mask int 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for m in &self.mask {
            writeln!(out, "{}", u8::from(*m))?;
        }
        Ok(())
    }

    /// Flat CSV `x,y,z,u1,u2,u3,p,mask`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let spec = self.spec();
        writeln!(out, "x,y,z,u1,u2,u3,p,mask")?;
        for (idx, (u, p)) in self.velocity.iter().zip(&self.pressure).enumerate() {
            let x = spec.point_linear(idx);
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}",
                x.x,
                x.y,
                x.z,
                u.x,
                u.y,
                u.z,
                p,
                u8::from(self.mask[idx])
            )?;
        }
        Ok(())
    }

    /// Speed `|u|` on the plane `k = slice`, row-major in `(j, i)`.
    pub fn slice_speed(&self, slice: usize) -> Result<Vec<Vec<Option<f64>>>> {
        let [nx, ny, nz] = self.dims;
        if slice >= nz {
            return Err(Error::IndexOutOfRange {
                index: slice,
                lo: 0,
                hi: nz - 1,
            });
        }
        let spec = self.spec();
        Ok((0..ny)
            .map(|j| {
                (0..nx)
                    .map(|i| {
                        let idx = spec.index(i, j, slice);
                        (!self.mask[idx]).then(|| self.velocity[idx].norm())
                    })
                    .collect()
            })
            .collect())
    }
}

/// `û^p = Σ_i U_{Ĉ_i}[v̂^{S_i} − u♭]` on a grid, using the twists stored in
/// `state` (the limit twists). Points within `exclusion` of a curve are
/// masked; the default radius is [`EXCLUSION_FACTOR`] node spacings.
pub fn perturbation_field(
    state: &SystemState,
    flow: &dyn BackgroundFlow,
    curves: &[Curve],
    grid: &GridSpec,
    exclusion: Option<f64>,
) -> Result<FieldGrid> {
    grid.validate()?;
    if state.bodies.len() != curves.len() {
        return Err(Error::LengthMismatch {
            expected: state.bodies.len(),
            got: curves.len(),
        });
    }
    let densities = state
        .bodies
        .iter()
        .zip(curves)
        .map(|(b, c)| {
            let placed = place_unchecked(c, &b.pose);
            LineMeasureDensity::from_twist(&placed, &b.pose.translation, &b.twist, flow, state.time)
        })
        .collect::<Result<Vec<_>>>()?;
    let radius = exclusion.unwrap_or_else(|| {
        EXCLUSION_FACTOR * curves.iter().map(|c| c.spacing()).fold(0.0, f64::max)
    });
    let indices: Vec<usize> = (0..grid.len()).collect();
    let samples = par::map(&indices, |_, &idx| -> Result<(Vec3, f64, bool)> {
        let x = grid.point_linear(idx);
        if densities
            .iter()
            .any(|d| point_curve_distance(&d.curve, &x) < radius)
        {
            return Ok((Vec3::zeros(), 0.0, true));
        }
        let mut u = Vec3::zeros();
        let mut p = 0.0;
        for d in &densities {
            let (du, dp) = d.evaluate(&x)?;
            u += du;
            p += dp;
        }
        Ok((u, p, false))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(FieldGrid {
        origin: grid.origin.into(),
        spacing: grid.spacing,
        dims: grid.dims,
        velocity: samples.iter().map(|s| s.0).collect(),
        pressure: samples.iter().map(|s| s.1).collect(),
        mask: samples.iter().map(|s| s.2).collect(),
    })
}

/// Maximum over unmasked interior points of `|div u|` with central
/// differences, divided by the largest `|∇u|` (Frobenius) over the same
/// points.
pub fn divergence_check(grid: &FieldGrid) -> Result<f64> {
    let [nx, ny, nz] = grid.dims;
    if nx < 3 || ny < 3 || nz < 3 {
        return Err(Error::Precondition(format!(
            "grid {nx}×{ny}×{nz} is smaller than 3³"
        )));
    }
    let spec = grid.spec();
    let h2 = 2.0 * grid.spacing;
    let mut div: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 1..nz - 1 {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let c = spec.index(i, j, k);
                let nb = [
                    (spec.index(i + 1, j, k), spec.index(i - 1, j, k)),
                    (spec.index(i, j + 1, k), spec.index(i, j - 1, k)),
                    (spec.index(i, j, k + 1), spec.index(i, j, k - 1)),
                ];
                if grid.mask[c] || nb.iter().any(|(a, b)| grid.mask[*a] || grid.mask[*b]) {
                    continue;
                }
                let mut g = Mat3::zeros();
                for (d, (a, b)) in nb.iter().enumerate() {
                    g.set_column(d, &((grid.velocity[*a] - grid.velocity[*b]) / h2));
                }
                scale = scale.max(g.norm());
                div = div.max(g.trace().abs());
            }
        }
    }
    Ok(if scale > 0.0 { div / scale } else { 0.0 })
}

/// One row of the near-field table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLawRow {
    pub eps: f64,
    /// `max_s |U(x_ε(s)) / |log ε| − v|`.
    pub ratio_error: f64,
}

/// Number of arc-length stations probed by [`near_field_log_law`].
pub const LOG_LAW_STATIONS: usize = 8;

/// Evaluates `U_C[v]` at distance `ε` from a closed curve along the
/// outward principal normal and compares `U / |log ε|` with `v`.
pub fn near_field_log_law(curve: &Curve, v: &Vec3, eps_list: &[f64]) -> Result<Vec<LogLawRow>> {
    if !curve.closed {
        return Err(Error::Precondition(
            "near-field law needs a closed curve".into(),
        ));
    }
    let kappa = curve.max_curvature();
    let reach = if kappa > 0.0 {
        1.0 / kappa
    } else {
        f64::INFINITY
    };
    let values = vec![*v; curve.len()];
    let density = LineMeasureDensity::new(curve, &values)?;
    let normals = crate::curves::differentiate(&curve.tangents, curve.spacing(), true);
    eps_list
        .iter()
        .map(|&eps| {
            if !(eps > 0.0 && eps < 1.0) || eps >= reach {
                return Err(Error::Precondition(format!(
                    "ε = {eps} must lie in (0, min(1, reach = {reach}))"
                )));
            }
            let mut err: f64 = 0.0;
            for m in 0..LOG_LAW_STATIONS {
                let j = m * curve.len() / LOG_LAW_STATIONS;
                let n = normals[j];
                let n = if n.norm() > 0.0 {
                    n.normalize()
                } else {
                    any_normal(&curve.tangents[j])
                };
                let x = curve.nodes[j] - n * eps;
                let u = density.velocity(&x)?;
                err = err.max((u / eps.ln().abs() - v).norm());
            }
            Ok(LogLawRow {
                eps,
                ratio_error: err,
            })
        })
        .collect()
}

fn any_normal(t: &Vec3) -> Vec3 {
    let a = if t.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    t.cross(&a).normalize()
}

/// Least-squares fit `error ≈ b / |log ε|`; returns `b` and the largest
/// relative deviation from the fit.
pub fn fit_inverse_log(rows: &[LogLawRow]) -> Option<(f64, f64)> {
    if rows.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = rows.iter().map(|r| 1.0 / r.eps.ln().abs()).collect();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(rows).map(|(x, r)| x * r.ratio_error).sum();
    let b = sxy / sxx;
    if !(b > 0.0) {
        return None;
    }
    let dev = xs
        .iter()
        .zip(rows)
        .map(|(x, r)| (r.ratio_error - b * x).abs() / (b * x))
        .fold(0.0, f64::max);
    Some((b, dev))
}
