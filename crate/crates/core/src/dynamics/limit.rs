use crate::curves::{place_unchecked, Curve, Pose, TwistVelocity};
use crate::flows::BackgroundFlow;
use crate::mobility::quasistatic;
use crate::{par, so3, Error, Result, Vec3, Vec6};

use super::{
    check_curves, default_collision_threshold, minimum_distance, step_count, BodyState,
    CollisionReport, Snapshot, SystemState, Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSettings {
    pub dt: f64,
    pub t_final: f64,
    /// Defaults to [`default_collision_threshold`].
    pub collision_threshold: Option<f64>,
    /// Repeat the run with `dt / 2` and record the difference.
    pub richardson: bool,
}

impl LimitSettings {
    pub fn new(t_final: f64, dt: f64) -> Self {
        Self {
            dt,
            t_final,
            collision_threshold: None,
            richardson: false,
        }
    }

    pub(crate) fn threshold(&self, curves: &[Curve]) -> f64 {
        self.collision_threshold
            .unwrap_or_else(|| default_collision_threshold(curves))
    }
}

pub(crate) fn body_twist(
    curve: &Curve,
    pose: &Pose,
    flow: &dyn BackgroundFlow,
    t: f64,
) -> Result<TwistVelocity> {
    let placed = place_unchecked(curve, pose);
    Ok(quasistatic(&placed, &pose.translation, flow, t)?.twist)
}

/// Quasi-static twist `K̂⁻¹ f̂♭` of each body at its current pose.
pub fn limit_rhs(
    state: &SystemState,
    flow: &dyn BackgroundFlow,
    curves: &[Curve],
) -> Result<Vec<TwistVelocity>> {
    check_curves(state.bodies.len(), curves)?;
    for b in &state.bodies {
        b.pose.validate()?;
    }
    par::map(&state.bodies, |i, b| {
        body_twist(&curves[i], &b.pose, flow, state.time)
    })
    .into_iter()
    .collect()
}

/// One Munthe-Kaas RK4 step: `Q = exp(Θ) Q_n`, `Θ' = dexpinv(Θ, ω)`.
fn rkmk4(
    curve: &Curve,
    pose: &Pose,
    k1: &TwistVelocity,
    flow: &dyn BackgroundFlow,
    t: f64,
    dt: f64,
) -> Result<Pose> {
    let rhs = |x: &Vec6, tt: f64| -> Result<Vec6> {
        let theta = Vec3::new(x[3], x[4], x[5]);
        let p = Pose {
            translation: Vec3::new(x[0], x[1], x[2]),
            rotation: so3::exp(&theta) * pose.rotation,
        };
        let tw = body_twist(curve, &p, flow, tt)?;
        Ok(stack(&tw.linear, &so3::dexpinv(&theta, &tw.angular)))
    };
    let x0 = stack(&pose.translation, &Vec3::zeros());
    let k1 = k1.to_vector();
    let k2 = rhs(&(x0 + k1 * (0.5 * dt)), t + 0.5 * dt)?;
    let k3 = rhs(&(x0 + k2 * (0.5 * dt)), t + 0.5 * dt)?;
    let k4 = rhs(&(x0 + k3 * dt), t + dt)?;
    let x = x0 + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
    let theta = Vec3::new(x[3], x[4], x[5]);
    Ok(Pose {
        translation: Vec3::new(x[0], x[1], x[2]),
        rotation: so3::project_to_rotation(&(so3::exp(&theta) * pose.rotation)),
    })
}

pub(crate) fn stack(a: &Vec3, b: &Vec3) -> Vec6 {
    Vec6::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

/// Advance with the twists stored in `state` taken as the rhs at `state`.
fn advance(
    state: &SystemState,
    dt: f64,
    flow: &dyn BackgroundFlow,
    curves: &[Curve],
    threshold: f64,
) -> Result<SystemState> {
    let t = state.time;
    let bodies: Vec<BodyState> = par::map(&state.bodies, |i, b| -> Result<BodyState> {
        let pose = rkmk4(&curves[i], &b.pose, &b.twist, flow, t, dt)?;
        let twist = body_twist(&curves[i], &pose, flow, t + dt)?;
        Ok(BodyState { pose, twist })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let d_min = minimum_distance(&bodies, curves);
    let time = t + dt;
    if d_min <= threshold {
        return Err(Error::Collision {
            time,
            distance: d_min,
        });
    }
    Ok(SystemState {
        bodies,
        time,
        d_min,
    })
}

/// One geometric RK4 step of the limit dynamics. The returned state carries
/// the limit twists at the new poses.
pub fn step_limit(
    state: &SystemState,
    dt: f64,
    flow: &dyn BackgroundFlow,
    curves: &[Curve],
    collision_threshold: f64,
) -> Result<SystemState> {
    if !(dt > 0.0) {
        return Err(Error::Precondition("dt must be positive".into()));
    }
    let rhs = limit_rhs(state, flow, curves)?;
    let mut start = state.clone();
    for (b, tw) in start.bodies.iter_mut().zip(rhs) {
        b.twist = tw;
    }
    advance(&start, dt, flow, curves, collision_threshold)
}

fn run(
    initial: &SystemState,
    flow: &dyn BackgroundFlow,
    curves: &[Curve],
    dt: f64,
    steps: usize,
    threshold: f64,
) -> Result<Trajectory> {
    let mut state = initial.clone();
    state.d_min = minimum_distance(&state.bodies, curves);
    if state.d_min <= threshold {
        return Err(Error::Precondition(format!(
            "initial overlap: d_min = {:e} ≤ threshold {:e}",
            state.d_min, threshold
        )));
    }
    let rhs = limit_rhs(&state, flow, curves)?;
    for (b, tw) in state.bodies.iter_mut().zip(rhs) {
        b.twist = tw;
    }
    let t0 = state.time;
    let mut traj = Trajectory {
        snapshots: vec![Snapshot::from_state(&state)],
        ..Default::default()
    };
    for n in 0..steps {
        let dt_n = t0 + (n + 1) as f64 * dt - state.time;
        match advance(&state, dt_n, flow, curves, threshold) {
            Ok(next) => {
                state = next;
                traj.snapshots.push(Snapshot::from_state(&state));
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

/// Limit trajectory on `[t₀, t₀ + T]` with a fixed step, stopping at the
/// first numerical collision.
pub fn simulate_limit(
    initial: &SystemState,
    flow: &dyn BackgroundFlow,
    curves: &[Curve],
    settings: &LimitSettings,
) -> Result<Trajectory> {
    check_curves(initial.bodies.len(), curves)?;
    let steps = step_count(settings.t_final, settings.dt)?;
    let threshold = settings.threshold(curves);
    let mut traj = run(initial, flow, curves, settings.dt, steps, threshold)?;
    if settings.richardson && !traj.halted_at_collision() {
        let fine = run(
            initial,
            flow,
            curves,
            0.5 * settings.dt,
            2 * steps,
            threshold,
        )?;
        if let (Some(a), Some(b)) = (traj.last(), fine.last()) {
            if !fine.halted_at_collision() {
                traj.error_estimate = Some(state_difference(&a.bodies, &b.bodies) / 15.0);
            }
        }
    }
    Ok(traj)
}

/// `max_i (|Δh_i|² + ‖ΔQ_i‖_F²)^{1/2}`.
pub(crate) fn state_difference(a: &[BodyState], b: &[BodyState]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            ((x.pose.translation - y.pose.translation).norm_squared()
                + (x.pose.rotation - y.pose.rotation).norm_squared())
            .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Ratio `|x_dt − x_{dt/2}| / |x_{dt/2} − x_{dt/4}|` of final states
/// (≈ 16 for a fourth-order method).
pub fn richardson_ratio(
    initial: &SystemState,
    flow: &dyn BackgroundFlow,
    curves: &[Curve],
    t_final: f64,
    dt: f64,
) -> Result<f64> {
    let mut finals = Vec::with_capacity(3);
    for k in 0..3 {
        let h = dt / f64::from(1u32 << k);
        let traj = simulate_limit(initial, flow, curves, &LimitSettings::new(t_final, h))?;
        if traj.halted_at_collision() {
            return Err(Error::Precondition(
                "collision during Richardson runs".into(),
            ));
        }
        finals.push(
            traj.snapshots
                .last()
                .map(|s| s.bodies.clone())
                .unwrap_or_default(),
        );
    }
    let coarse = state_difference(&finals[0], &finals[1]);
    let fine = state_difference(&finals[1], &finals[2]);
    if fine == 0.0 {
        return Err(Error::DegenerateInput(
            "solution is reproduced exactly by every step size".into(),
        ));
    }
    Ok(coarse / fine)
}
