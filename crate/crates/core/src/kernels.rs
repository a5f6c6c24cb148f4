//! Stokeslet, pressure kernel and the local anisotropic drag matrices.
//!
//! `S(x) = (Id + x̂⊗x̂) / (8π|x|)`, `P(x) = x / (4π|x|³)`,
//! `k(p) = 8π(Id − ½ p⊗p)`, `S₀(p) = (Id + p⊗p) / 8π`.
//! For unit `p`, `S₀(p) k(p) = Id`.

use std::f64::consts::PI;

use crate::{Error, Mat3, Result, Vec3};

/// Unit-norm tolerance accepted by [`s0`].
pub const UNIT_TOL: f64 = 1e-10;

/// Oseen tensor (Stokeslet) `S(x)`.
pub fn oseen(x: &Vec3) -> Result<Mat3> {
    let r = x.norm();
    if !(r > 0.0) {
        return Err(Error::SingularPoint(r));
    }
    Ok(oseen_unchecked(x, r))
}

#[inline]
pub(crate) fn oseen_unchecked(x: &Vec3, r: f64) -> Mat3 {
    let xh = x / r;
    (Mat3::identity() + xh * xh.transpose()) / (8.0 * PI * r)
}

/// Pressure kernel `P(x) = x / (4π|x|³)`.
pub fn pressure_kernel(x: &Vec3) -> Result<Vec3> {
    let r = x.norm();
    if !(r > 0.0) {
        return Err(Error::SingularPoint(r));
    }
    Ok(x / (4.0 * PI * r * r * r))
}

/// Local drag matrix `k(p) = 8π(Id − ½ p⊗p)`, defined for every `p`.
#[inline]
pub fn drag_matrix(p: &Vec3) -> Mat3 {
    (Mat3::identity() - p * p.transpose() * 0.5) * (8.0 * PI)
}

/// `S₀(p) = (Id + p⊗p) / 8π` on the unit sphere.
pub fn s0(p: &Vec3) -> Result<Mat3> {
    let n = p.norm();
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::Precondition(format!(
            "S₀ needs a unit vector, |p| = {n}"
        )));
    }
    Ok((Mat3::identity() + p * p.transpose()) / (8.0 * PI))
}
