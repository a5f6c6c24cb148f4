use serde::{Deserialize, Serialize};

use crate::{so3, Error, Mat3, Result, Vec3, Vec6};

/// Tolerance on `QᵀQ = Id` and `det Q = 1` for accepted rotations.
pub const ROTATION_TOL: f64 = 1e-10;

/// Rigid placement `x ↦ h + Q x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Vec3,
    pub rotation: Mat3,
}

impl Pose {
    pub fn new(translation: Vec3, rotation: Mat3) -> Result<Self> {
        check_rotation(&rotation)?;
        Ok(Self {
            translation,
            rotation,
        })
    }

    pub fn identity() -> Self {
        Self {
            translation: Vec3::zeros(),
            rotation: Mat3::identity(),
        }
    }

    pub fn from_translation(h: Vec3) -> Self {
        Self {
            translation: h,
            rotation: Mat3::identity(),
        }
    }

    pub fn from_axis_angle(h: Vec3, axis: Vec3, angle: f64) -> Self {
        Self {
            translation: h,
            rotation: so3::from_axis_angle(&axis, angle),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_rotation(&self.rotation)
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.translation + self.rotation * x
    }

    /// Pose after moving rigidly with twist `(v, ω)` for time `dt`
    /// (translation `h + dt v`, rotation `exp(dt ω) Q`).
    pub fn advanced(&self, twist: &TwistVelocity, dt: f64) -> Self {
        Self {
            translation: self.translation + twist.linear * dt,
            rotation: so3::exp(&(twist.angular * dt)) * self.rotation,
        }
    }
}

pub(crate) fn check_rotation(q: &Mat3) -> Result<()> {
    if !q.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidPose("non-finite rotation entries".into()));
    }
    let (orth, det) = so3::orthogonality_defect(q);
    if orth > ROTATION_TOL || det > ROTATION_TOL {
        return Err(Error::InvalidPose(format!(
            "rotation is not in SO(3): |QᵀQ - Id| = {orth:e}, |det Q - 1| = {det:e}"
        )));
    }
    Ok(())
}

/// Rigid velocity `x ↦ v + ω ∧ (x − h)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TwistVelocity {
    pub linear: Vec3,
    pub angular: Vec3,
}

impl TwistVelocity {
    pub fn new(linear: Vec3, angular: Vec3) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector(&self) -> Vec6 {
        Vec6::new(
            self.linear.x,
            self.linear.y,
            self.linear.z,
            self.angular.x,
            self.angular.y,
            self.angular.z,
        )
    }

    pub fn from_vector(y: &Vec6) -> Self {
        Self {
            linear: Vec3::new(y[0], y[1], y[2]),
            angular: Vec3::new(y[3], y[4], y[5]),
        }
    }

    /// Velocity of the material point `x` of a body centered at `center`.
    pub fn velocity_at(&self, center: &Vec3, x: &Vec3) -> Vec3 {
        self.linear + self.angular.cross(&(x - center))
    }

    pub fn is_finite(&self) -> bool {
        self.linear
            .iter()
            .chain(self.angular.iter())
            .all(|x| x.is_finite())
    }
}
