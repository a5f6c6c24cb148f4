//! Rigid-body dynamics of the centerlines.
//!
//! * the limit model: each body follows the quasi-static twist
//!   `K̂⁻¹ f̂♭` on `R³ × SO(3)` ([`step_limit`], [`simulate_limit`]);
//! * the relaxation model `ε² (M Y)' = −|log ε|⁻¹ K̂ (Y − Y♭) + f^a`
//!   with inertia ([`step_relaxation`], [`simulate_relaxation`]).

mod compare;
pub mod expo;
mod limit;
mod relaxation;

use std::io::Write;

use serde::Serialize;

use crate::curves::{min_distance, place_unchecked, Curve, Pose, TwistVelocity};
use crate::{Error, Result};

pub use compare::{
    compare_trajectories, fit_decay_rate, pose_error, ComparisonReport, DECAY_WINDOW,
};
pub use limit::{limit_rhs, richardson_ratio, simulate_limit, step_limit, LimitSettings};
pub use relaxation::{
    faxen_stack, modulated_energy, simulate_relaxation, step_relaxation, Coefficients,
    RelaxationBody, RelaxationModel, RelaxationState,
};

/// Collision threshold relative to the shortest reference curve.
pub const DEFAULT_COLLISION_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BodyState {
    pub pose: Pose,
    pub twist: TwistVelocity,
}

impl BodyState {
    pub fn at_rest(pose: Pose) -> Self {
        Self {
            pose,
            twist: TwistVelocity::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemState {
    pub bodies: Vec<BodyState>,
    pub time: f64,
    /// Minimum distance between placed centerlines (`∞` for one body).
    pub d_min: f64,
}

impl SystemState {
    /// Bodies at rest at the given poses.
    pub fn new(poses: &[Pose], curves: &[Curve], time: f64) -> Result<Self> {
        check_curves(poses.len(), curves)?;
        for p in poses {
            p.validate()?;
        }
        let bodies: Vec<BodyState> = poses.iter().map(|p| BodyState::at_rest(*p)).collect();
        let d_min = minimum_distance(&bodies, curves);
        Ok(Self {
            bodies,
            time,
            d_min,
        })
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.bodies.iter().map(|b| b.pose).collect()
    }

    pub fn twists(&self) -> Vec<TwistVelocity> {
        self.bodies.iter().map(|b| b.twist).collect()
    }
}

pub(crate) fn check_curves(bodies: usize, curves: &[Curve]) -> Result<()> {
    if bodies != curves.len() {
        return Err(Error::LengthMismatch {
            expected: bodies,
            got: curves.len(),
        });
    }
    if bodies == 0 {
        return Err(Error::DegenerateInput("no bodies".into()));
    }
    Ok(())
}

/// `d_min` over all pairs of placed centerlines.
pub fn minimum_distance(bodies: &[BodyState], curves: &[Curve]) -> f64 {
    let placed: Vec<Curve> = bodies
        .iter()
        .zip(curves)
        .map(|(b, c)| place_unchecked(c, &b.pose))
        .collect();
    let mut d = f64::INFINITY;
    for i in 0..placed.len() {
        for j in i + 1..placed.len() {
            d = d.min(min_distance(&placed[i], &placed[j]));
        }
    }
    d
}

/// `DEFAULT_COLLISION_FRACTION × min_i L_i`.
pub fn default_collision_threshold(curves: &[Curve]) -> f64 {
    DEFAULT_COLLISION_FRACTION
        * curves
            .iter()
            .map(|c| c.length)
            .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyDiagnostic {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "Z")]
    pub z: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub time: f64,
    pub d_min: f64,
    pub bodies: Vec<BodyState>,
    /// Quasi-static twists `Y♭` (relaxation model only).
    pub faxen: Option<Vec<TwistVelocity>>,
    pub energy: Option<EnergyDiagnostic>,
}

impl Snapshot {
    pub(crate) fn from_state(state: &SystemState) -> Self {
        Self {
            time: state.time,
            d_min: state.d_min,
            bodies: state.bodies.clone(),
            faxen: None,
            energy: None,
        }
    }

    /// `|Y − Y♭|` over all bodies, when `Y♭` is recorded.
    pub fn layer_deviation(&self) -> Option<f64> {
        let faxen = self.faxen.as_ref()?;
        Some(
            self.bodies
                .iter()
                .zip(faxen)
                .map(|(b, f)| (b.twist.to_vector() - f.to_vector()).norm_squared())
                .sum::<f64>()
                .sqrt(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionReport {
    pub time: f64,
    pub d_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    /// First step at which `d_min` fell below the threshold.
    pub collision: Option<CollisionReport>,
    /// Halving-based estimate of the final-state error.
    pub error_estimate: Option<f64>,
}

impl Trajectory {
    pub fn halted_at_collision(&self) -> bool {
        self.collision.is_some()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    /// `|Y − Y♭|` per snapshot (empty for the limit model).
    pub fn layer_deviation(&self) -> Vec<f64> {
        self.snapshots
            .iter()
            .filter_map(Snapshot::layer_deviation)
            .collect()
    }

    /// Fitted initial-layer decay rate of `|Y − Y♭|`.
    pub fn decay_rate(&self) -> Option<f64> {
        let dev = self.layer_deviation();
        if dev.len() != self.snapshots.len() {
            return None;
        }
        fit_decay_rate(&self.times(), &dev)
    }

    /// CSV with columns `t, body, h(3), Q(9 row-major), v(3), ω(3), d_min, E, Z`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "t,body,h1,h2,h3,q11,q12,q13,q21,q22,q23,q31,q32,q33,v1,v2,v3,w1,w2,w3,d_min,E,Z"
        )?;
        for s in &self.snapshots {
            let (e, z) = s.energy.map_or((f64::NAN, f64::NAN), |d| (d.e, d.z));
            for (i, b) in s.bodies.iter().enumerate() {
                let mut row = vec![fmt(s.time), i.to_string()];
                row.extend(b.pose.translation.iter().map(|x| fmt(*x)));
                for r in 0..3 {
                    for c in 0..3 {
                        row.push(fmt(b.pose.rotation[(r, c)]));
                    }
                }
                row.extend(
                    b.twist
                        .linear
                        .iter()
                        .chain(b.twist.angular.iter())
                        .map(|x| fmt(*x)),
                );
                row.push(fmt(s.d_min));
                row.push(fmt(e));
                row.push(fmt(z));
                writeln!(out, "{}", row.join(","))?;
            }
        }
        Ok(())
    }
}

fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.17e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub(crate) fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_final > 0.0) || !dt.is_finite() || !t_final.is_finite() {
        return Err(Error::Precondition("dt and T must be positive".into()));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * t_final || n < 1.0 {
        return Err(Error::Precondition(format!(
            "T = {t_final} is not a multiple of dt = {dt}"
        )));
    }
    Ok(n as usize)
}
