//! Local Lagrange interpolation of node data in arc length.

use crate::Vec3;

/// Stencil width of the local interpolant.
pub const STENCIL: usize = 8;

/// Interpolates node-sampled fields of a uniform arc-length grid
/// (periodic for closed curves, clamped stencils at open ends).
#[derive(Debug, Clone, Copy)]
pub struct ArcInterpolator {
    n: usize,
    spacing: f64,
    length: f64,
    closed: bool,
}

impl ArcInterpolator {
    pub fn new(n: usize, spacing: f64, length: f64, closed: bool) -> Self {
        debug_assert!(n >= STENCIL);
        Self {
            n,
            spacing,
            length,
            closed,
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// First node index of the stencil and the offset `s/h - first`.
    fn stencil(&self, s: f64) -> (isize, f64) {
        let x = s / self.spacing;
        let centre = x.floor() as isize - (STENCIL as isize / 2 - 1);
        if self.closed {
            (centre, x - centre as f64)
        } else {
            let first = centre.clamp(0, (self.n - STENCIL) as isize);
            (first, x - first as f64)
        }
    }

    fn index(&self, k: isize) -> usize {
        if self.closed {
            k.rem_euclid(self.n as isize) as usize
        } else {
            k as usize
        }
    }

    /// Value and arc-length derivative of the interpolant of `values` at `s`.
    pub fn eval_with_derivative(&self, values: &[Vec3], s: f64) -> (Vec3, Vec3) {
        let s = if self.closed {
            s.rem_euclid(self.length)
        } else {
            s.clamp(0.0, self.length)
        };
        let (first, x) = self.stencil(s);
        let mut val = Vec3::zeros();
        let mut der = Vec3::zeros();
        for j in 0..STENCIL {
            let xj = j as f64;
            let mut lj = 1.0;
            let mut dj = 0.0;
            for m in 0..STENCIL {
                if m == j {
                    continue;
                }
                let xm = m as f64;
                let f = 1.0 / (xj - xm);
                // product rule accumulated alongside the basis value
                dj = dj * (x - xm) * f + lj * f;
                lj *= (x - xm) * f;
            }
            let v = values[self.index(first + j as isize)];
            val += v * lj;
            der += v * dj;
        }
        (val, der / self.spacing)
    }

    pub fn eval(&self, values: &[Vec3], s: f64) -> Vec3 {
        self.eval_with_derivative(values, s).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_polynomials_exactly_on_open_grid() {
        let n = 20;
        let h = 0.1;
        let f = |s: f64| Vec3::new(s.powi(7), 1.0 - s, s * s);
        let df = |s: f64| Vec3::new(7.0 * s.powi(6), -1.0, 2.0 * s);
        let vals: Vec<Vec3> = (0..n).map(|i| f(i as f64 * h)).collect();
        let it = ArcInterpolator::new(n, h, h * (n - 1) as f64, false);
        for s in [0.0, 0.03, 0.55, 1.234, 1.9] {
            let (v, d) = it.eval_with_derivative(&vals, s);
            assert!((v - f(s)).norm() < 1e-11, "s={s}");
            assert!((d - df(s)).norm() < 1e-9, "s={s}");
        }
    }

    #[test]
    fn periodic_interpolation_of_trig_data() {
        let n = 64;
        let l = std::f64::consts::TAU;
        let h = l / n as f64;
        let vals: Vec<Vec3> = (0..n)
            .map(|i| {
                let s = i as f64 * h;
                Vec3::new(s.cos(), s.sin(), 0.0)
            })
            .collect();
        let it = ArcInterpolator::new(n, h, l, true);
        for s in [0.01, 3.0, 6.27, -0.5, 7.0] {
            let (v, d) = it.eval_with_derivative(&vals, s);
            assert!((v - Vec3::new(s.cos(), s.sin(), 0.0)).norm() < 1e-10);
            assert!((d - Vec3::new(-s.sin(), s.cos(), 0.0)).norm() < 1e-8);
        }
    }
}
