//! Small SO(3) toolkit: hat map, Rodrigues exponential, inverse
//! differential of the exponential, and polar re-projection.

use crate::{Mat3, Vec3};

/// Skew-symmetric matrix `[w]×` with `[w]× x = w ∧ x`.
pub fn hat(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rotation exponential `exp([w]×)` by Rodrigues' formula.
pub fn exp(w: &Vec3) -> Mat3 {
    let theta2 = w.norm_squared();
    let k = hat(w);
    let (a, b) = if theta2 < 1e-8 {
        // Taylor expansions of sin θ/θ and (1 - cos θ)/θ²
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Mat3::identity() + k * a + k * k * b
}

/// Inverse of the right-trivialized differential of `exp`, applied to `w`.
///
/// If `Q(t) = exp([θ(t)]×) Q₀` and `Q' = [ω]× Q`, then `θ' = dexpinv(θ, ω)`.
pub fn dexpinv(theta: &Vec3, w: &Vec3) -> Vec3 {
    let t2 = theta.norm_squared();
    let c = if t2 < 1e-6 {
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        let t = t2.sqrt();
        (1.0 - 0.5 * t / (0.5 * t).tan()) / t2
    };
    let tw = theta.cross(w);
    w - 0.5 * tw + c * theta.cross(&tw)
}

/// Nearest rotation in the Frobenius norm (polar factor).
pub fn project_to_rotation(q: &Mat3) -> Mat3 {
    let svd = q.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * vt;
    }
    r
}

/// `‖QᵀQ − Id‖_max` and `|det Q − 1|`.
pub fn orthogonality_defect(q: &Mat3) -> (f64, f64) {
    let d = q.transpose() * q - Mat3::identity();
    (d.amax(), (q.determinant() - 1.0).abs())
}

/// Rotation of angle `angle` about `axis` (normalized internally).
pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Mat3 {
    let n = axis.norm();
    if n == 0.0 {
        return Mat3::identity();
    }
    exp(&(axis * (angle / n)))
}

/// Rotation matrix of the unit quaternion `w + xi + yj + zk` (normalized internally).
pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Mat3 {
    let n = (w * w + x * x + y * y + z * z).sqrt();
    let (w, x, y, z) = (w / n, x / n, y / n, z / n);
    Mat3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Rotation taking `e₃` to the unit vector `t` with minimal angle.
pub fn align_e3(t: &Vec3) -> Mat3 {
    let e3 = Vec3::z();
    let axis = e3.cross(t);
    let s = axis.norm();
    let c = e3.dot(t);
    if s < 1e-14 {
        if c > 0.0 {
            Mat3::identity()
        } else {
            Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0))
        }
    } else {
        from_axis_angle(&axis, s.atan2(c))
    }
}
