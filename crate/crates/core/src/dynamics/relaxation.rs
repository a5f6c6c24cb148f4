//! Inertial relaxation model integrated with ETDRK4.
//!
//! Per body, with `W = Y − Y♭(P, t)` and `A = ε⁻² M⁻¹ K`:
//! `W' = −A W + g`, `g = M⁻¹(ε⁻² f^a − (0, ω ∧ 𝒥ω)) − DY♭/Dt`.
//! A step linearizes at `A_n` and integrates the pose through
//! `q = p + A_n⁻¹ W`, which removes the stiff layer from the pose equation.

use nalgebra::{DMatrix, DVector};

use crate::curves::{
    place_unchecked, CrossSectionSpec, Curve, Pose, SectionProfile, TwistVelocity,
};
use crate::flows::BackgroundFlow;
use crate::mobility::{archimedes_load, inertia_from_filament, quasistatic, InertiaSpec};
use crate::{par, so3, Error, Mat3, Mat6, Result, Vec3, Vec6};

use super::expo::{phi, LinearRelaxation};
use super::limit::{body_twist, stack, LimitSettings};
use super::{
    check_curves, minimum_distance, step_count, BodyState, CollisionReport, EnergyDiagnostic,
    Snapshot, SystemState, Trajectory,
};

/// How the coefficients `M`, `K`, `Y♭`, `f^a` follow the motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coefficients {
    /// Re-evaluated at every stage from the current pose.
    #[default]
    Full,
    /// Frozen at their initial values; the gyroscopic term is dropped.
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationBody {
    pub section: CrossSectionSpec,
    pub inertia: InertiaSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationModel {
    pub eps: f64,
    pub bodies: Vec<RelaxationBody>,
    pub coefficients: Coefficients,
    /// Step of the central difference used for `DY♭/Dt`.
    pub fd_step: f64,
}

impl RelaxationModel {
    pub fn new(eps: f64, bodies: Vec<RelaxationBody>) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Precondition(format!(
                "ε must lie in (0, 1), got {eps}"
            )));
        }
        for b in &bodies {
            b.section.validate()?;
            b.inertia.validate()?;
        }
        Ok(Self {
            eps,
            bodies,
            coefficients: Coefficients::Full,
            fd_step: 1e-5,
        })
    }

    /// Filaments of constant density with the given section shapes and
    /// thickness `ε`. Inertia is taken about each curve's barycenter.
    pub fn from_filaments(
        eps: f64,
        curves: &[Curve],
        profiles: &[SectionProfile],
        densities: &[f64],
    ) -> Result<Self> {
        if profiles.len() != curves.len() || densities.len() != curves.len() {
            return Err(Error::LengthMismatch {
                expected: curves.len(),
                got: profiles.len().min(densities.len()),
            });
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Precondition(format!(
                "ε must lie in (0, 1), got {eps}"
            )));
        }
        let bodies = curves
            .iter()
            .zip(profiles)
            .zip(densities)
            .map(|((c, p), rho)| {
                let section = CrossSectionSpec::new(eps, *p)?;
                let inertia = inertia_from_filament(c, &section, *rho)?;
                Ok(RelaxationBody { section, inertia })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(eps, bodies)
    }

    pub fn frozen(mut self) -> Self {
        self.coefficients = Coefficients::Frozen;
        self
    }

    /// `|log ε|`.
    pub fn log_factor(&self) -> f64 {
        self.eps.ln().abs()
    }
}

/// Stacked relaxation unknowns and the coefficients at the current poses.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationState {
    pub y: DVector<f64>,
    pub y_faxen: DVector<f64>,
    /// Block-diagonal `blockdiag(m Id, Q 𝒥₀ Qᵀ)`.
    pub m: DMatrix<f64>,
    /// Block-diagonal surrogate `|log ε|⁻¹ K̂`.
    pub k: DMatrix<f64>,
    pub f_a: DVector<f64>,
    pub eps: f64,
    pub log_factor: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy)]
struct BodyCoefficients {
    m: Mat6,
    k: Mat6,
    y_flat: Vec6,
    f_a: Vec6,
}

impl RelaxationState {
    /// Coefficients at the poses of `state`; `twists` default to rest.
    pub fn new(
        state: &SystemState,
        twists: Option<&[TwistVelocity]>,
        model: &RelaxationModel,
        flow: &dyn BackgroundFlow,
        curves: &[Curve],
    ) -> Result<Self> {
        check_curves(state.bodies.len(), curves)?;
        check_curves(model.bodies.len(), curves)?;
        if let Some(tw) = twists {
            if tw.len() != curves.len() {
                return Err(Error::LengthMismatch {
                    expected: curves.len(),
                    got: tw.len(),
                });
            }
        }
        let coeffs = par::map(&state.bodies, |i, b| {
            b.pose.validate()?;
            coefficients(model, i, &curves[i], &b.pose, flow, state.time)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let n = 6 * curves.len();
        let mut out = Self {
            y: DVector::zeros(n),
            y_faxen: DVector::zeros(n),
            m: DMatrix::zeros(n, n),
            k: DMatrix::zeros(n, n),
            f_a: DVector::zeros(n),
            eps: model.eps,
            log_factor: model.log_factor(),
            time: state.time,
        };
        for (i, c) in coeffs.iter().enumerate() {
            let y = twists.map_or(Vec6::zeros(), |t| t[i].to_vector());
            out.set_body(i, &y, c);
        }
        Ok(out)
    }

    pub fn bodies(&self) -> usize {
        self.y.len() / 6
    }

    fn set_body(&mut self, i: usize, y: &Vec6, c: &BodyCoefficients) {
        self.y.fixed_rows_mut::<6>(6 * i).copy_from(y);
        self.y_faxen.fixed_rows_mut::<6>(6 * i).copy_from(&c.y_flat);
        self.f_a.fixed_rows_mut::<6>(6 * i).copy_from(&c.f_a);
        self.m.fixed_view_mut::<6, 6>(6 * i, 6 * i).copy_from(&c.m);
        self.k.fixed_view_mut::<6, 6>(6 * i, 6 * i).copy_from(&c.k);
    }

    fn body(&self, i: usize) -> (Vec6, BodyCoefficients) {
        (
            self.y.fixed_rows::<6>(6 * i).into(),
            BodyCoefficients {
                m: self.m.fixed_view::<6, 6>(6 * i, 6 * i).into(),
                k: self.k.fixed_view::<6, 6>(6 * i, 6 * i).into(),
                y_flat: self.y_faxen.fixed_rows::<6>(6 * i).into(),
                f_a: self.f_a.fixed_rows::<6>(6 * i).into(),
            },
        )
    }

    /// Per-body twists `Y`.
    pub fn twists(&self) -> Vec<TwistVelocity> {
        (0..self.bodies())
            .map(|i| TwistVelocity::from_vector(&self.y.fixed_rows::<6>(6 * i).into()))
            .collect()
    }

    /// Per-body quasi-static twists `Y♭`.
    pub fn faxen_twists(&self) -> Vec<TwistVelocity> {
        (0..self.bodies())
            .map(|i| TwistVelocity::from_vector(&self.y_faxen.fixed_rows::<6>(6 * i).into()))
            .collect()
    }

    /// `min_i λ_min(M_i⁻¹ K_i)`.
    pub fn min_generalized_eigenvalue(&self) -> Result<f64> {
        let mut lam = f64::INFINITY;
        for i in 0..self.bodies() {
            let (_, c) = self.body(i);
            lam = lam.min(LinearRelaxation::new(&c.m, &c.k, 1.0)?.min_rate());
        }
        Ok(lam)
    }
}

fn coefficients(
    model: &RelaxationModel,
    i: usize,
    curve: &Curve,
    pose: &Pose,
    flow: &dyn BackgroundFlow,
    t: f64,
) -> Result<BodyCoefficients> {
    let body = &model.bodies[i];
    let placed = place_unchecked(curve, pose);
    let qs = quasistatic(&placed, &pose.translation, flow, t)?;
    let f_a = archimedes_load(&placed, &body.section, flow, &pose.translation, t).to_vector();
    Ok(BodyCoefficients {
        m: body.inertia.world_matrix(&pose.rotation),
        k: qs.resistance.0 / model.log_factor(),
        y_flat: qs.twist.to_vector(),
        f_a,
    })
}

/// Stacked quasi-static twists `Y♭ = K̂⁻¹ f̂♭`.
pub fn faxen_stack(
    state: &SystemState,
    flow: &dyn BackgroundFlow,
    curves: &[Curve],
) -> Result<DVector<f64>> {
    let tw = super::limit_rhs(state, flow, curves)?;
    let mut y = DVector::zeros(6 * tw.len());
    for (i, t) in tw.iter().enumerate() {
        y.fixed_rows_mut::<6>(6 * i).copy_from(&t.to_vector());
    }
    Ok(y)
}

/// `E = ½ (Y − Y♭)·M (Y − Y♭)`, `Z = √E`.
pub fn modulated_energy(rstate: &RelaxationState) -> EnergyDiagnostic {
    let w = &rstate.y - &rstate.y_faxen;
    let e = (0.5 * w.dot(&(&rstate.m * &w))).max(0.0);
    EnergyDiagnostic {
        e,
        z: e.sqrt(),
        t: rstate.time,
    }
}

type Pair = (Vec6, Vec6);

fn add(a: &Pair, b: &Pair, s: f64) -> Pair {
    (a.0 + b.0 * s, a.1 + b.1 * s)
}

struct BodyStep<'a> {
    model: &'a RelaxationModel,
    index: usize,
    curve: &'a Curve,
    flow: &'a dyn BackgroundFlow,
    rotation: Mat3,
    start: BodyCoefficients,
    lin: LinearRelaxation,
}

impl BodyStep<'_> {
    fn pose(&self, q: &Vec6, w: &Vec6) -> (Pose, Vec3) {
        let p = q - self.lin.solve(w);
        let theta = Vec3::new(p[3], p[4], p[5]);
        (
            Pose {
                translation: Vec3::new(p[0], p[1], p[2]),
                rotation: so3::exp(&theta) * self.rotation,
            },
            theta,
        )
    }

    /// Nonlinear parts `(N_q, N_W)` at `(q, W, t)`.
    fn rhs(&self, u: &Pair, t: f64) -> Result<Pair> {
        let (q, w) = u;
        let (pose, theta) = self.pose(q, w);
        let eps2 = self.model.eps * self.model.eps;
        let (y, r) = match self.model.coefficients {
            Coefficients::Frozen => {
                let c = &self.start;
                let g = solve_spd(&c.m, &(c.f_a / eps2))?;
                (c.y_flat + w, g)
            }
            Coefficients::Full => {
                let c = coefficients(self.model, self.index, self.curve, &pose, self.flow, t)?;
                let y = c.y_flat + w;
                let omega = Vec3::new(y[3], y[4], y[5]);
                let j = c.m.fixed_view::<3, 3>(3, 3);
                let gyro = stack(&Vec3::zeros(), &omega.cross(&(j * omega)));
                let delta = self.model.fd_step;
                let tw = TwistVelocity::from_vector(&y);
                let ahead =
                    body_twist(self.curve, &pose.advanced(&tw, delta), self.flow, t + delta)?;
                let behind = body_twist(
                    self.curve,
                    &pose.advanced(&tw, -delta),
                    self.flow,
                    t - delta,
                )?;
                let dy_flat = (ahead.to_vector() - behind.to_vector()) / (2.0 * delta);
                let g = solve_spd(&c.m, &(c.f_a / eps2 - gyro))? - dy_flat;
                let a_w = solve_spd(&c.m, &(c.k * w))? / eps2;
                (y, g + self.lin.apply(w) - a_w)
            }
        };
        let pdot = stack(
            &Vec3::new(y[0], y[1], y[2]),
            &so3::dexpinv(&theta, &Vec3::new(y[3], y[4], y[5])),
        );
        Ok((pdot - w + self.lin.solve(&r), r))
    }

    fn expo(&self, tau: f64, u: &Pair) -> Pair {
        (u.0, self.lin.phi_apply(0, tau, &u.1))
    }

    /// `φ_k(L τ)` with `L = diag(0, −A_n)`.
    fn phik(&self, k: usize, tau: f64, u: &Pair) -> Pair {
        (u.0 * phi(k, 0.0), self.lin.phi_apply(k, tau, &u.1))
    }

    fn etdrk4(&self, u: &Pair, t: f64, h: f64) -> Result<Pair> {
        let h2 = 0.5 * h;
        let nu = self.rhs(u, t)?;
        let a = add(&self.expo(h2, u), &self.phik(1, h2, &nu), h2);
        let na = self.rhs(&a, t + h2)?;
        let b = add(&self.expo(h2, u), &self.phik(1, h2, &na), h2);
        let nb = self.rhs(&b, t + h2)?;
        let c = add(
            &self.expo(h2, &a),
            &self.phik(1, h2, &add(&nb, &nb, 1.0).sub(&nu)),
            h2,
        );
        let nc = self.rhs(&c, t + h)?;
        let f1 = |v: &Pair| -> Pair {
            let p1 = self.phik(1, h, v);
            let p2 = self.phik(2, h, v);
            let p3 = self.phik(3, h, v);
            (
                p1.0 - p2.0 * 3.0 + p3.0 * 4.0,
                p1.1 - p2.1 * 3.0 + p3.1 * 4.0,
            )
        };
        let f2 = |v: &Pair| -> Pair {
            let p2 = self.phik(2, h, v);
            let p3 = self.phik(3, h, v);
            (p2.0 - p3.0 * 2.0, p2.1 - p3.1 * 2.0)
        };
        let f3 = |v: &Pair| -> Pair {
            let p2 = self.phik(2, h, v);
            let p3 = self.phik(3, h, v);
            (p3.0 * 4.0 - p2.0, p3.1 * 4.0 - p2.1)
        };
        let mid = (na.0 + nb.0, na.1 + nb.1);
        let mut out = self.expo(h, u);
        out = add(&out, &f1(&nu), h);
        out = add(&out, &f2(&mid), 2.0 * h);
        out = add(&out, &f3(&nc), h);
        Ok(out)
    }
}

trait PairSub {
    fn sub(&self, other: &Pair) -> Pair;
}

impl PairSub for Pair {
    fn sub(&self, other: &Pair) -> Pair {
        (self.0 - other.0, self.1 - other.1)
    }
}

fn solve_spd(m: &Mat6, v: &Vec6) -> Result<Vec6> {
    m.cholesky()
        .map(|c| c.solve(v))
        .ok_or_else(|| Error::Precondition("inertia matrix is not positive definite".into()))
}

/// One ETDRK4 step of the relaxation model. Poses move with `Y`; the
/// coefficients are re-evaluated at the new poses unless frozen.
pub fn step_relaxation(
    rstate: &RelaxationState,
    state: &SystemState,
    dt: f64,
    model: &RelaxationModel,
    flow: &dyn BackgroundFlow,
    curves: &[Curve],
    collision_threshold: f64,
) -> Result<(RelaxationState, SystemState)> {
    if !(dt > 0.0) {
        return Err(Error::Precondition("dt must be positive".into()));
    }
    check_curves(state.bodies.len(), curves)?;
    if rstate.bodies() != curves.len() || model.bodies.len() != curves.len() {
        return Err(Error::LengthMismatch {
            expected: curves.len(),
            got: rstate.bodies(),
        });
    }
    let t = state.time;
    let results = par::map(
        &state.bodies,
        |i, b| -> Result<(BodyState, BodyCoefficients)> {
            let (y, start) = rstate.body(i);
            let lin = LinearRelaxation::new(&start.m, &start.k, model.eps)?;
            let step = BodyStep {
                model,
                index: i,
                curve: &curves[i],
                flow,
                rotation: b.pose.rotation,
                start,
                lin,
            };
            let w = y - start.y_flat;
            let q = stack(&b.pose.translation, &Vec3::zeros()) + step.lin.solve(&w);
            let (q1, w1) = step.etdrk4(&(q, w), t, dt)?;
            let (pose, _) = step.pose(&q1, &w1);
            let pose = Pose {
                translation: pose.translation,
                rotation: so3::project_to_rotation(&pose.rotation),
            };
            let coeffs = match model.coefficients {
                Coefficients::Full => coefficients(model, i, &curves[i], &pose, flow, t + dt)?,
                Coefficients::Frozen => start,
            };
            let twist = TwistVelocity::from_vector(&(coeffs.y_flat + w1));
            if !twist.is_finite() {
                return Err(Error::DegenerateInput(
                    "non-finite twist in relaxation step".into(),
                ));
            }
            Ok((BodyState { pose, twist }, coeffs))
        },
    )
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut next = rstate.clone();
    next.time = t + dt;
    let bodies: Vec<BodyState> = results.iter().map(|(b, _)| *b).collect();
    for (i, (b, c)) in results.iter().enumerate() {
        next.set_body(i, &b.twist.to_vector(), c);
    }
    let d_min = minimum_distance(&bodies, curves);
    if d_min <= collision_threshold {
        return Err(Error::Collision {
            time: t + dt,
            distance: d_min,
        });
    }
    Ok((
        next,
        SystemState {
            bodies,
            time: t + dt,
            d_min,
        },
    ))
}

fn relaxation_snapshot(state: &SystemState, rstate: &RelaxationState) -> Snapshot {
    Snapshot {
        faxen: Some(rstate.faxen_twists()),
        energy: Some(modulated_energy(rstate)),
        ..Snapshot::from_state(state)
    }
}

/// Relaxation trajectory with fixed step, starting from `initial_twists`
/// (rest by default).
pub fn simulate_relaxation(
    initial: &SystemState,
    initial_twists: Option<&[TwistVelocity]>,
    model: &RelaxationModel,
    flow: &dyn BackgroundFlow,
    curves: &[Curve],
    settings: &LimitSettings,
) -> Result<Trajectory> {
    check_curves(initial.bodies.len(), curves)?;
    let steps = step_count(settings.t_final, settings.dt)?;
    let threshold = settings.threshold(curves);
    let mut state = initial.clone();
    state.d_min = minimum_distance(&state.bodies, curves);
    if state.d_min <= threshold {
        return Err(Error::Precondition(format!(
            "initial overlap: d_min = {:e} ≤ threshold {:e}",
            state.d_min, threshold
        )));
    }
    let mut rstate = RelaxationState::new(&state, initial_twists, model, flow, curves)?;
    for (b, tw) in state.bodies.iter_mut().zip(rstate.twists()) {
        b.twist = tw;
    }
    let t0 = state.time;
    let mut traj = Trajectory {
        snapshots: vec![relaxation_snapshot(&state, &rstate)],
        ..Default::default()
    };
    for n in 0..steps {
        let dt_n = t0 + (n + 1) as f64 * settings.dt - state.time;
        match step_relaxation(&rstate, &state, dt_n, model, flow, curves, threshold) {
            Ok((r, s)) => {
                rstate = r;
                state = s;
                traj.snapshots.push(relaxation_snapshot(&state, &rstate));
            }
            Err(Error::Collision { time, distance }) => {
                traj.collision = Some(CollisionReport {
                    time,
                    d_min: distance,
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{resample_parametric, Preset};
    use crate::dynamics::{pose_error, simulate_limit};
    use crate::flows::Flow;

    fn setup(eps: f64) -> (Vec<Curve>, RelaxationModel) {
        let curves = vec![resample_parametric(&Preset::Circle { radius: 1.0 }, 64).unwrap()];
        let model = RelaxationModel::from_filaments(
            eps,
            &curves,
            &[SectionProfile::Disc { radius: 1.0 }],
            &[1.0],
        )
        .unwrap();
        (curves, model)
    }

    #[test]
    fn equilibrium_is_preserved_when_frozen() {
        let (curves, model) = setup(0.1);
        let model = model.frozen();
        let flow = Flow::Shear { rate: 1.0 };
        let pose = Pose::from_axis_angle(Vec3::zeros(), Vec3::x(), 0.7);
        let s0 = SystemState::new(&[pose], &curves, 0.0).unwrap();
        let y_flat = super::super::limit_rhs(&s0, &flow, &curves).unwrap();
        let traj = simulate_relaxation(
            &s0,
            Some(&y_flat),
            &model,
            &flow,
            &curves,
            &LimitSettings::new(0.1, 0.01),
        )
        .unwrap();
        for s in &traj.snapshots {
            assert_eq!(s.layer_deviation().unwrap(), 0.0);
            assert_eq!(s.energy.unwrap().e, 0.0);
        }
    }

    #[test]
    fn frozen_layer_contracts_at_generalized_rate() {
        let (curves, model) = setup(0.1);
        let model = model.frozen();
        let flow = Flow::Shear { rate: 1.0 };
        let pose = Pose::from_axis_angle(Vec3::zeros(), Vec3::new(1.0, 0.2, 0.0), 0.9);
        let s0 = SystemState::new(&[pose], &curves, 0.0).unwrap();
        let twists = [TwistVelocity::new(
            Vec3::new(1.0, -0.5, 0.3),
            Vec3::new(0.2, 0.4, -1.0),
        )];
        let r0 = RelaxationState::new(&s0, Some(&twists), &model, &flow, &curves).unwrap();
        let lam = r0.min_generalized_eigenvalue().unwrap() / (model.eps * model.eps);
        let traj = simulate_relaxation(
            &s0,
            Some(&twists),
            &model,
            &flow,
            &curves,
            &LimitSettings::new(0.1, 5e-4),
        )
        .unwrap();
        let z0 = traj.snapshots[0].energy.unwrap().z;
        for s in &traj.snapshots {
            assert!(s.energy.unwrap().z <= z0 * (-lam * s.time).exp() * (1.0 + 1e-8));
        }
        let rate = traj.decay_rate().unwrap();
        assert!((rate / lam - 1.0).abs() < 0.2, "rate {rate} vs {lam}");
    }

    #[test]
    fn energy_examples() {
        let mut r = RelaxationState {
            y: DVector::zeros(6),
            y_faxen: DVector::zeros(6),
            m: DMatrix::identity(6, 6),
            k: DMatrix::identity(6, 6),
            f_a: DVector::zeros(6),
            eps: 0.1,
            log_factor: 0.1f64.ln().abs(),
            time: 0.0,
        };
        assert_eq!(modulated_energy(&r).e, 0.0);
        r.y[0] = 1.0;
        let d = modulated_energy(&r);
        assert!((d.e - 0.5).abs() < 1e-15 && (d.z - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn full_model_tracks_limit_in_shear() {
        let flow = Flow::Shear { rate: 1.0 };
        let pose = Pose::from_axis_angle(Vec3::zeros(), Vec3::x(), 0.6);
        let settings = LimitSettings::new(0.5, 0.01);
        let mut errors = Vec::new();
        for eps in [1e-1, 1e-2] {
            let (curves, model) = setup(eps);
            let s0 = SystemState::new(&[pose], &curves, 0.0).unwrap();
            let relax = simulate_relaxation(&s0, None, &model, &flow, &curves, &settings).unwrap();
            let limit = simulate_limit(&s0, &flow, &curves, &settings).unwrap();
            let e = relax
                .snapshots
                .iter()
                .zip(&limit.snapshots)
                .map(|(a, b)| pose_error(&curves, &a.bodies, &b.bodies))
                .fold(0.0, f64::max);
            errors.push(e);
            let q = relax.last().unwrap().bodies[0].pose.rotation;
            assert!((q.transpose() * q - Mat3::identity()).amax() < 1e-10);
        }
        assert!(errors[1] < errors[0], "{errors:?}");
        assert!(errors[0] < 0.1, "{errors:?}");
    }
}
