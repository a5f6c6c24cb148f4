//! Renormalized resistance matrices, Faxén loads, inertia and buoyancy
//! loads assembled by quadrature along the centerline, and the
//! quasi-static balance `K̂ (v̂, ω̂) = f̂♭`.
//!
//! Everything here is built on the symmetric bilinear line pairing
//! `I_C[v, w] = ½ ∮ k(τ) v · w dH¹`.

use nalgebra::{Cholesky, Matrix3x6};
use serde::{Deserialize, Serialize};

use crate::curves::{CrossSectionSpec, Curve, TwistVelocity};
use crate::flows::BackgroundFlow;
use crate::kernels::drag_matrix;
use crate::{so3, Error, Mat3, Mat6, Result, Vec3, Vec6};

/// Largest condition number accepted by [`solve_quasistatic`].
pub const MAX_CONDITION: f64 = 1e12;

/// 6×6 resistance matrix ordered `(force; torque) × (v; ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResistanceMatrix(pub Mat6);

impl ResistanceMatrix {
    pub fn matrix(&self) -> &Mat6 {
        &self.0
    }

    pub fn eigenvalues(&self) -> Vec6 {
        let sym = (self.0 + self.0.transpose()) * 0.5;
        sym.symmetric_eigenvalues()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().min()
    }

    pub fn condition_number(&self) -> f64 {
        let ev = self.eigenvalues();
        let lo = ev.min();
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            ev.max() / lo
        }
    }

    /// `‖K − Kᵀ‖_max / ‖K‖_max`.
    pub fn asymmetry(&self) -> f64 {
        (self.0 - self.0.transpose()).amax() / self.0.amax()
    }

    pub fn apply(&self, twist: &TwistVelocity) -> Wrench {
        Wrench::from_vector(&(self.0 * twist.to_vector()))
    }
}

/// Force and torque.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub fn to_vector(&self) -> Vec6 {
        Vec6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        )
    }

    pub fn from_vector(f: &Vec6) -> Self {
        Self {
            force: Vec3::new(f[0], f[1], f[2]),
            torque: Vec3::new(f[3], f[4], f[5]),
        }
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

/// Mass and body-frame inertia, both divided by `ε²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertiaSpec {
    pub mass_scaled: f64,
    pub inertia_body: Mat3,
}

impl InertiaSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass_scaled > 0.0) {
            return Err(Error::Precondition("mass must be positive".into()));
        }
        let j = &self.inertia_body;
        if (j - j.transpose()).amax() > 1e-12 * j.amax() || j.symmetric_eigenvalues().min() <= 0.0 {
            return Err(Error::Precondition(
                "inertia must be symmetric positive definite".into(),
            ));
        }
        Ok(())
    }

    /// `blockdiag(m Id, Q 𝒥₀ Qᵀ)`.
    pub fn world_matrix(&self, rotation: &Mat3) -> Mat6 {
        let mut m = Mat6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(Mat3::identity() * self.mass_scaled));
        m.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&(rotation * self.inertia_body * rotation.transpose()));
        m
    }
}

/// Rigid-velocity basis `[Id | −[x − h]×]` (columns `v_1 … v_6` at `x`).
#[inline]
fn rigid_basis(center: &Vec3, x: &Vec3) -> Matrix3x6<f64> {
    let mut b = Matrix3x6::zeros();
    b.fixed_view_mut::<3, 3>(0, 0).copy_from(&Mat3::identity());
    b.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(-so3::hat(&(x - center))));
    b
}

/// `I_C[v, w] = ½ ∮ k(τ) v · w dH¹` for fields sampled at the nodes.
pub fn line_pairing(curve: &Curve, v: &[Vec3], w: &[Vec3]) -> Result<f64> {
    for f in [v, w] {
        if f.len() != curve.len() {
            return Err(Error::LengthMismatch {
                expected: curve.len(),
                got: f.len(),
            });
        }
    }
    Ok(0.5
        * curve
            .tangents
            .iter()
            .zip(&curve.arc_weights)
            .zip(v.iter().zip(w))
            .map(|((t, q), (a, b))| q * (drag_matrix(t) * a).dot(b))
            .sum::<f64>())
}

/// `K̂_{αβ} = I_C[v_α[h], v_β[h]]` for a curve placed in the world frame.
pub fn resistance_matrix(curve: &Curve, center: &Vec3) -> Result<ResistanceMatrix> {
    curve.ensure_not_straight()?;
    Ok(resistance_matrix_unchecked(curve, center))
}

pub(crate) fn resistance_matrix_unchecked(curve: &Curve, center: &Vec3) -> ResistanceMatrix {
    let mut k = Mat6::zeros();
    for ((x, t), w) in curve
        .nodes
        .iter()
        .zip(&curve.tangents)
        .zip(&curve.arc_weights)
    {
        let b = rigid_basis(center, x);
        k += b.transpose() * drag_matrix(t) * b * (0.5 * w);
    }
    ResistanceMatrix((k + k.transpose()) * 0.5)
}

/// `blockdiag(Q, Q) K̂ blockdiag(Qᵀ, Qᵀ)`.
pub fn conjugate_resistance(
    body_frame: &ResistanceMatrix,
    rotation: &Mat3,
) -> Result<ResistanceMatrix> {
    crate::curves::Pose::new(Vec3::zeros(), *rotation)?;
    let mut r = Mat6::zeros();
    r.fixed_view_mut::<3, 3>(0, 0).copy_from(rotation);
    r.fixed_view_mut::<3, 3>(3, 3).copy_from(rotation);
    Ok(ResistanceMatrix(r * body_frame.0 * r.transpose()))
}

/// Faxén force and torque `(I_C[v_α, u♭])_α`.
pub fn faxen_load(curve: &Curve, center: &Vec3, flow: &dyn BackgroundFlow, t: f64) -> Wrench {
    let mut f = Vec6::zeros();
    for ((x, tau), w) in curve
        .nodes
        .iter()
        .zip(&curve.tangents)
        .zip(&curve.arc_weights)
    {
        let b = rigid_basis(center, x);
        f += b.transpose() * (drag_matrix(tau) * flow.velocity(t, x)) * (0.5 * w);
    }
    Wrench::from_vector(&f)
}

/// `(v̂, ω̂) = K̂⁻¹ f̂♭` by Cholesky factorization with a residual check.
pub fn solve_quasistatic(k: &ResistanceMatrix, load: &Wrench) -> Result<TwistVelocity> {
    let cond = k.condition_number();
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let chol = Cholesky::new(k.0).ok_or(Error::IllConditioned(f64::INFINITY))?;
    let f = load.to_vector();
    let mut y = chol.solve(&f);
    let fnorm = f.norm();
    let mut res = k.0 * y - f;
    if res.norm() > 1e-10 * fnorm {
        y -= chol.solve(&res);
        res = k.0 * y - f;
        if res.norm() > 1e-10 * fnorm {
            return Err(Error::IllConditioned(cond));
        }
    }
    Ok(TwistVelocity::from_vector(&y))
}

/// Leading-order mass and inertia (both `/ε²`) of a filament of constant
/// density, with the section collapsed onto the centerline.
pub fn inertia_from_filament(
    curve: &Curve,
    section: &CrossSectionSpec,
    density: f64,
) -> Result<InertiaSpec> {
    section.validate()?;
    if !(density > 0.0) {
        return Err(Error::Precondition("density must be positive".into()));
    }
    let c = curve.barycenter();
    let mut mass = 0.0;
    let mut inertia = Mat3::zeros();
    for (j, (x, w)) in curve.nodes.iter().zip(&curve.arc_weights).enumerate() {
        let a = section.area(curve.arclength(j));
        if !(a > 0.0) {
            return Err(Error::DegenerateInput("cross-section has zero area".into()));
        }
        let r = x - c;
        let dm = density * a * w;
        mass += dm;
        inertia += (Mat3::identity() * r.norm_squared() - r * r.transpose()) * dm;
    }
    Ok(InertiaSpec {
        mass_scaled: mass,
        inertia_body: (inertia + inertia.transpose()) * 0.5,
    })
}

/// Buoyancy-type load `ε² ∮ area (Δu♭ + ∇p♭)` and its torque about `center`.
pub fn archimedes_load(
    curve: &Curve,
    section: &CrossSectionSpec,
    flow: &dyn BackgroundFlow,
    center: &Vec3,
    t: f64,
) -> Wrench {
    let eps2 = section.thickness * section.thickness;
    let mut out = Wrench::default();
    for (j, (x, w)) in curve.nodes.iter().zip(&curve.arc_weights).enumerate() {
        let a = section.area(curve.arclength(j));
        let q = (flow.laplacian(t, x) + flow.pressure_gradient(t, x)) * (a * w * eps2);
        out.force += q;
        out.torque += (x - center).cross(&q);
    }
    out
}

/// Resistance, Faxén load and quasi-static twist of one placed body.
#[derive(Debug, Clone, Copy)]
pub struct QuasiStatic {
    pub resistance: ResistanceMatrix,
    pub load: Wrench,
    pub twist: TwistVelocity,
}

pub fn quasistatic(
    curve: &Curve,
    center: &Vec3,
    flow: &dyn BackgroundFlow,
    t: f64,
) -> Result<QuasiStatic> {
    let resistance = resistance_matrix(curve, center)?;
    let load = faxen_load(curve, center, flow, t);
    let twist = solve_quasistatic(&resistance, &load)?;
    Ok(QuasiStatic {
        resistance,
        load,
        twist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{place, resample_parametric, Pose, Preset};
    use crate::flows::Flow;
    use std::f64::consts::PI;

    fn unit_circle(n: usize) -> Curve {
        resample_parametric(&Preset::Circle { radius: 1.0 }, n).unwrap()
    }

    #[test]
    fn pairing_examples() {
        let c = unit_circle(128);
        let e3 = vec![Vec3::z(); c.len()];
        assert!((line_pairing(&c, &e3, &e3).unwrap() - 8.0 * PI * PI).abs() < 1e-8);
        let zero = vec![Vec3::zeros(); c.len()];
        assert_eq!(line_pairing(&c, &zero, &e3).unwrap(), 0.0);
        assert!(matches!(
            line_pairing(&c, &e3[..3], &e3),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn circle_resistance_closed_form() {
        let k = resistance_matrix(&unit_circle(512), &Vec3::zeros()).unwrap();
        let pi2 = PI * PI;
        let expected = Vec6::new(
            6.0 * pi2,
            6.0 * pi2,
            8.0 * pi2,
            4.0 * pi2,
            4.0 * pi2,
            4.0 * pi2,
        );
        let diff = k.0 - Mat6::from_diagonal(&expected);
        assert!(diff.amax() < 1e-8 * 8.0 * pi2, "{diff}");
    }

    #[test]
    fn straight_curve_is_rejected() {
        let seg = resample_parametric(
            &Preset::Segment {
                start: [0.0; 3],
                end: [1.0, 0.0, 0.0],
            },
            32,
        )
        .unwrap();
        assert!(matches!(
            resistance_matrix(&seg, &Vec3::zeros()),
            Err(Error::StraightCurve { .. })
        ));
    }

    #[test]
    fn symmetric_planar_curve_decouples() {
        let e = resample_parametric(&Preset::Ellipse { a: 2.0, b: 0.7 }, 256).unwrap();
        let k = resistance_matrix(&e, &Vec3::zeros()).unwrap();
        assert!(k.0.fixed_view::<3, 3>(0, 3).amax() < 1e-10 * k.0.amax());
    }

    #[test]
    fn conjugation_by_half_turn_about_e1() {
        let c = unit_circle(256);
        let k0 = resistance_matrix(&c, &Vec3::zeros()).unwrap();
        let q = crate::so3::from_axis_angle(&Vec3::x(), PI);
        let pose = Pose::new(Vec3::zeros(), q).unwrap();
        let world = resistance_matrix(&place(&c, &pose).unwrap(), &Vec3::zeros()).unwrap();
        let conj = conjugate_resistance(&k0, &q).unwrap();
        assert!((world.0 - conj.0).amax() < 1e-10 * k0.0.amax());
        assert!((conjugate_resistance(&k0, &Mat3::identity()).unwrap().0 - k0.0).amax() == 0.0);
        let mut a: Vec<f64> = k0.eigenvalues().iter().copied().collect();
        let mut b: Vec<f64> = conj.eigenvalues().iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10 * x.abs());
        }
        assert!(conjugate_resistance(&k0, &(Mat3::identity() * 2.0)).is_err());
    }

    #[test]
    fn faxen_examples() {
        let c = unit_circle(128);
        let flow = Flow::Constant {
            velocity: [0.0, 0.0, 1.0],
        };
        let f = faxen_load(&c, &Vec3::zeros(), &flow, 0.0);
        assert!((f.force - Vec3::new(0.0, 0.0, 8.0 * PI * PI)).norm() < 1e-10);
        assert!(f.torque.norm() < 1e-10);
        assert_eq!(
            faxen_load(&c, &Vec3::zeros(), &Flow::Still, 0.0),
            Wrench::default()
        );
        let a = Flow::Shear { rate: 1.0 };
        let b = Flow::Vortex {
            omega: [0.1, 0.3, -0.2],
        };
        let sum = Flow::Sum {
            flows: vec![a.clone(), b.clone()],
        };
        let lhs = faxen_load(&c, &Vec3::zeros(), &sum, 0.0).to_vector();
        let rhs = faxen_load(&c, &Vec3::zeros(), &a, 0.0).to_vector()
            + faxen_load(&c, &Vec3::zeros(), &b, 0.0).to_vector();
        assert!((lhs - rhs).amax() < 1e-12 * lhs.amax());
    }

    #[test]
    fn passive_tracer_and_zero_load() {
        let c = resample_parametric(&Preset::Trefoil { scale: 1.0 }, 256).unwrap();
        let u = [0.3, -1.0, 2.0];
        let qs = quasistatic(
            &c,
            &Vec3::new(0.1, 0.0, 0.0),
            &Flow::Constant { velocity: u },
            0.0,
        )
        .unwrap();
        assert!((qs.twist.linear - Vec3::from(u)).norm() < 1e-10);
        assert!(qs.twist.angular.norm() < 1e-10);
        let z = solve_quasistatic(&qs.resistance, &Wrench::default()).unwrap();
        assert_eq!(z, TwistVelocity::zero());
    }

    #[test]
    fn ill_conditioned_matrix_is_rejected() {
        let mut m = Mat6::identity();
        m[(5, 5)] = 1e-14;
        assert!(matches!(
            solve_quasistatic(&ResistanceMatrix(m), &Wrench::default()),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn inertia_of_unit_circle() {
        let c = unit_circle(256);
        let x = CrossSectionSpec::disc(0.1, 1.0).unwrap();
        let i = inertia_from_filament(&c, &x, 1.0).unwrap();
        assert!((i.mass_scaled - 2.0 * PI * PI).abs() < 1e-10);
        // area π times π diag(1, 1, 2) from ∮ (|x|² Id − x⊗x) on the unit circle
        let expected = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 2.0)) * (PI * PI);
        assert!((i.inertia_body - expected).amax() < 1e-10);
        let i2 = inertia_from_filament(&c, &x, 2.0).unwrap();
        assert!((i2.mass_scaled - 2.0 * i.mass_scaled).abs() < 1e-12);
        assert!((i2.inertia_body - i.inertia_body * 2.0).amax() < 1e-12);
        assert!(i.validate().is_ok());
    }

    #[test]
    fn archimedes_examples() {
        let c = unit_circle(128);
        let x = CrossSectionSpec::disc(0.01, 1.0).unwrap();
        let zero = archimedes_load(
            &c,
            &x,
            &Flow::Constant {
                velocity: [1.0, 2.0, 3.0],
            },
            &Vec3::zeros(),
            0.0,
        );
        assert_eq!(zero, Wrench::default());
        // Poiseuille: Δu = (2 rate, 0, 0) is constant on the ring
        let w = archimedes_load(&c, &x, &Flow::Poiseuille { rate: 0.5 }, &Vec3::zeros(), 0.0);
        assert!((w.force - Vec3::new(1e-4 * PI * 2.0 * PI, 0.0, 0.0)).norm() < 1e-14);
        assert!(w.torque.norm() < 1e-14);
    }
}
