//! Seeded random curves, poses, twists and flows for property checks.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curves::{
    recenter, resample_parametric, Curve, Parametrization, Pose, Preset, TwistVelocity,
};
use crate::{so3, Result, Vec3};

/// Deterministic generator for test inputs.
pub struct Sampler {
    rng: ChaCha8Rng,
}

/// Closed curve `Σ_k a_k cos 2πkt + b_k sin 2πkt` on top of a unit circle.
#[derive(Debug, Clone)]
pub struct FourierCurve {
    pub cos: Vec<Vec3>,
    pub sin: Vec<Vec3>,
}

impl Parametrization for FourierCurve {
    fn point(&self, t: f64) -> Vec3 {
        let mut x = Vec3::zeros();
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let (s, c) = (TAU * (k + 1) as f64 * t).sin_cos();
            x += a * c + b * s;
        }
        x
    }

    fn derivative(&self, t: f64) -> Vec3 {
        let mut x = Vec3::zeros();
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let w = TAU * (k + 1) as f64;
            let (s, c) = (w * t).sin_cos();
            x += (b * c - a * s) * w;
        }
        x
    }

    fn closed(&self) -> bool {
        true
    }
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    /// Uniform on the unit sphere.
    pub fn unit_vector(&mut self) -> Vec3 {
        loop {
            let v = Vec3::new(
                self.uniform(-1.0, 1.0),
                self.uniform(-1.0, 1.0),
                self.uniform(-1.0, 1.0),
            );
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                return v / n;
            }
        }
    }

    pub fn vector(&mut self, scale: f64) -> Vec3 {
        Vec3::new(
            self.uniform(-1.0, 1.0),
            self.uniform(-1.0, 1.0),
            self.uniform(-1.0, 1.0),
        ) * scale
    }

    /// Haar-distributed rotation.
    pub fn rotation(&mut self) -> crate::Mat3 {
        let axis = self.unit_vector();
        let angle = self.uniform(0.0, std::f64::consts::PI);
        so3::from_axis_angle(&axis, angle)
    }

    pub fn pose(&mut self, translation_scale: f64) -> Pose {
        Pose {
            translation: self.vector(translation_scale),
            rotation: self.rotation(),
        }
    }

    pub fn twist(&mut self, scale: f64) -> TwistVelocity {
        TwistVelocity::new(self.vector(scale), self.vector(scale))
    }

    /// Random smooth closed curve (perturbed circle, up to third harmonics).
    pub fn fourier_curve(&mut self) -> FourierCurve {
        let mut cos = vec![Vec3::x(), Vec3::zeros(), Vec3::zeros()];
        let mut sin = vec![Vec3::y(), Vec3::zeros(), Vec3::zeros()];
        for k in 0..3 {
            let amp = 0.1 / ((k + 1) * (k + 1)) as f64;
            cos[k] += self.vector(amp);
            sin[k] += self.vector(amp);
        }
        FourierCurve { cos, sin }
    }

    /// Random open preset curve (helical or circular arc).
    pub fn open_preset(&mut self) -> Preset {
        if self.rng.random_bool(0.5) {
            Preset::HelixArc {
                radius: self.uniform(0.3, 1.5),
                pitch: self.uniform(0.1, 1.0),
                turns: self.uniform(0.3, 1.5),
            }
        } else {
            Preset::CircularArc {
                radius: self.uniform(0.5, 2.0),
                angle: self.uniform(0.5, 5.0),
            }
        }
    }

    /// Random non-straight curve at `n` nodes, recentered on its barycenter.
    /// Closed and open curves are drawn with equal probability.
    pub fn curve(&mut self, n: usize) -> Result<Curve> {
        let c = if self.rng.random_bool(0.5) {
            let f = self.fourier_curve();
            resample_parametric(&f, n)?
        } else {
            let p = self.open_preset();
            resample_parametric(&p, n)?
        };
        Ok(recenter(&c).0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_valid() {
        let mut a = Sampler::new(7);
        let mut b = Sampler::new(7);
        for _ in 0..5 {
            let ca = a.curve(64).unwrap();
            let cb = b.curve(64).unwrap();
            assert_eq!(ca, cb);
            ca.ensure_not_straight().unwrap();
            assert!(ca.barycenter().norm() < 1e-12);
            a.pose(1.0).validate().unwrap();
            b.pose(1.0);
        }
    }

    #[test]
    fn fourier_derivative_matches_fd() {
        let f = Sampler::new(3).fourier_curve();
        let h = 1e-6;
        for t in [0.0, 0.3, 0.77] {
            let fd = (f.point(t + h) - f.point(t - h)) / (2.0 * h);
            assert!((fd - f.derivative(t)).norm() < 1e-6);
        }
    }
}
