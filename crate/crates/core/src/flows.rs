//! Analytic background flows with exact derivatives.

use serde::{Deserialize, Serialize};

use crate::{Mat3, Vec3};

/// Divergence-free background flow `u♭(t, x)` with its derivatives and
/// the gradient of the companion pressure `p♭`.
pub trait BackgroundFlow: Sync {
    fn velocity(&self, t: f64, x: &Vec3) -> Vec3;
    /// `G[i][j] = ∂u_i/∂x_j`.
    fn gradient(&self, t: f64, x: &Vec3) -> Mat3;
    fn laplacian(&self, t: f64, x: &Vec3) -> Vec3;
    fn pressure_gradient(&self, t: f64, x: &Vec3) -> Vec3;
}

/// Catalog of background flows selectable by name in configurations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Flow {
    /// Fluid at rest.
    #[default]
    Still,
    /// Uniform flow `U`.
    Constant { velocity: [f64; 3] },
    /// Linear shear `(rate · x₂, 0, 0)`.
    Shear { rate: f64 },
    /// Rigid rotation `Ω ∧ x`.
    Vortex { omega: [f64; 3] },
    /// Plane cellular flow `A (sin kx cos ky, −cos kx sin ky, 0)`.
    TaylorGreen { amplitude: f64, wavenumber: f64 },
    /// Quadratic profile `(rate · x₂², 0, 0)`.
    Poiseuille { rate: f64 },
    /// Sum of flows.
    Sum { flows: Vec<Flow> },
}

#[allow(clippy::only_used_in_recursion)]
impl BackgroundFlow for Flow {
    fn velocity(&self, t: f64, x: &Vec3) -> Vec3 {
        match self {
            Flow::Still => Vec3::zeros(),
            Flow::Constant { velocity } => Vec3::from(*velocity),
            Flow::Shear { rate } => Vec3::new(rate * x.y, 0.0, 0.0),
            Flow::Vortex { omega } => Vec3::from(*omega).cross(x),
            Flow::TaylorGreen {
                amplitude,
                wavenumber: k,
            } => {
                let (sx, cx) = (k * x.x).sin_cos();
                let (sy, cy) = (k * x.y).sin_cos();
                Vec3::new(sx * cy, -cx * sy, 0.0) * *amplitude
            }
            Flow::Poiseuille { rate } => Vec3::new(rate * x.y * x.y, 0.0, 0.0),
            Flow::Sum { flows } => flows.iter().map(|f| f.velocity(t, x)).sum(),
        }
    }

    fn gradient(&self, t: f64, x: &Vec3) -> Mat3 {
        match self {
            Flow::Still | Flow::Constant { .. } => Mat3::zeros(),
            Flow::Shear { rate } => {
                let mut g = Mat3::zeros();
                g[(0, 1)] = *rate;
                g
            }
            Flow::Vortex { omega } => crate::so3::hat(&Vec3::from(*omega)),
            Flow::TaylorGreen {
                amplitude,
                wavenumber: k,
            } => {
                let (sx, cx) = (k * x.x).sin_cos();
                let (sy, cy) = (k * x.y).sin_cos();
                Mat3::new(
                    k * cx * cy,
                    -k * sx * sy,
                    0.0,
                    k * sx * sy,
                    -k * cx * cy,
                    0.0,
                    0.0,
                    0.0,
                    0.0,
                ) * *amplitude
            }
            Flow::Poiseuille { rate } => {
                let mut g = Mat3::zeros();
                g[(0, 1)] = 2.0 * rate * x.y;
                g
            }
            Flow::Sum { flows } => flows.iter().map(|f| f.gradient(t, x)).sum(),
        }
    }

    fn laplacian(&self, t: f64, x: &Vec3) -> Vec3 {
        match self {
            Flow::TaylorGreen { wavenumber: k, .. } => self.velocity(t, x) * (-2.0 * k * k),
            Flow::Poiseuille { rate } => Vec3::new(2.0 * rate, 0.0, 0.0),
            Flow::Sum { flows } => flows.iter().map(|f| f.laplacian(t, x)).sum(),
            _ => Vec3::zeros(),
        }
    }

    /// All catalog flows are taken with a uniform pressure.
    fn pressure_gradient(&self, _t: f64, _x: &Vec3) -> Vec3 {
        Vec3::zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Vec<Flow> {
        vec![
            Flow::Constant {
                velocity: [1.0, -2.0, 0.5],
            },
            Flow::Shear { rate: 1.3 },
            Flow::Vortex {
                omega: [0.2, -0.1, 0.7],
            },
            Flow::TaylorGreen {
                amplitude: 0.8,
                wavenumber: 1.7,
            },
            Flow::Poiseuille { rate: 0.6 },
            Flow::Sum {
                flows: vec![Flow::Shear { rate: 1.0 }, Flow::Poiseuille { rate: 1.0 }],
            },
        ]
    }

    #[test]
    fn derivatives_match_finite_differences_and_divergence_vanishes() {
        let h = 1e-4;
        let pts = [Vec3::new(0.3, -0.7, 1.1), Vec3::new(-1.2, 0.4, 0.0)];
        for f in catalog() {
            for x in &pts {
                let g = f.gradient(0.0, x);
                assert!(g.trace().abs() < 1e-10, "{f:?}");
                let mut lap = Vec3::zeros();
                for j in 0..3 {
                    let e = Vec3::ith(j, h);
                    let fd = (f.velocity(0.0, &(x + e)) - f.velocity(0.0, &(x - e))) / (2.0 * h);
                    assert!((fd - g.column(j)).norm() < 1e-7, "{f:?}");
                    lap += (f.velocity(0.0, &(x + e)) - f.velocity(0.0, x) * 2.0
                        + f.velocity(0.0, &(x - e)))
                        / (h * h);
                }
                assert!((lap - f.laplacian(0.0, x)).norm() < 1e-5, "{f:?}");
            }
        }
    }

    #[test]
    fn config_names() {
        let f: Flow = serde_json::from_str(r#"{"kind":"shear","rate":2.0}"#).unwrap();
        assert_eq!(f, Flow::Shear { rate: 2.0 });
        assert!(serde_json::from_str::<Flow>(r#"{"kind":"nope"}"#).is_err());
    }
}
