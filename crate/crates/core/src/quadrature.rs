//! Gauss–Legendre rules and endpoint-corrected trapezoid weights.

use std::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `m`-point rule, nodes by Newton iteration on `P_m`.
    pub fn new(m: usize) -> Self {
        assert!(m >= 1);
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..m.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(m, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + r * x))
            .sum::<f64>()
            * r
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (c + r * x, w * r))
    }
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if m == 0 { 1.0 } else { p1 };
    let d = m as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Weights of the trapezoid rule with fourth-order endpoint corrections
/// (`3/8, 7/6, 23/24, 1, …`) on `n` equispaced nodes of spacing `h`.
pub fn corrected_trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 6, "endpoint-corrected rule needs at least 6 nodes");
    let mut w = vec![h; n];
    for (i, c) in [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0].into_iter().enumerate() {
        w[i] = c * h;
        w[n - 1 - i] = c * h;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for m in [1, 2, 5, 8, 16] {
            let gl = GaussLegendre::new(m);
            assert!((gl.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            let deg = 2 * m - 1;
            let exact = 1.0 / (deg as f64 + 1.0) * (1.0 - (-1.0f64).powi(deg as i32 + 1));
            let got = gl.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
            assert!((got - exact).abs() < 1e-13, "m={m}: {got} vs {exact}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_smooth_functions() {
        let gl = GaussLegendre::new(16);
        let got = gl.integrate(0.0, 1.0, |x| x.exp());
        assert!((got - (1f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn corrected_trapezoid_converges_at_fourth_order() {
        let err = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            let w = corrected_trapezoid_weights(n, h);
            let s: f64 = w
                .iter()
                .enumerate()
                .map(|(i, w)| w * (i as f64 * h).exp())
                .sum();
            (s - (1f64.exp() - 1.0)).abs()
        };
        let ratio = err(33) / err(65);
        assert!(ratio > 13.0, "ratio {ratio}");
    }
}
