//! Exponential-integrator building blocks for the stiff linear part
//! `ε² M W' = −K W` with `M`, `K` symmetric positive definite.

use nalgebra::SymmetricEigen;

use crate::{Error, Mat6, Result, Vec6};

/// `φ_k(z)` for `k = 0..=3` (`φ₀ = eᶻ`).
pub fn phi(k: usize, z: f64) -> f64 {
    if z.abs() < 1.0 {
        // Σ z^j / (j + k)!
        let mut term = 1.0;
        for i in 1..=k {
            term /= i as f64;
        }
        let mut sum = 0.0;
        for j in 0..40 {
            sum += term;
            term *= z / (j + k + 1) as f64;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    let e = z.exp();
    match k {
        0 => e,
        1 => (e - 1.0) / z,
        2 => (e - 1.0 - z) / (z * z),
        3 => (e - 1.0 - z - 0.5 * z * z) / (z * z * z),
        _ => panic!("phi_{k} not implemented"),
    }
}

/// Spectral factorization of `A = ε⁻² M⁻¹ K`:
/// `A = M^{-1/2} V Λ Vᵀ M^{1/2}` with `Λ` the eigenvalues of
/// `ε⁻² M^{-1/2} K M^{-1/2}`.
#[derive(Debug, Clone)]
pub struct LinearRelaxation {
    rates: Vec6,
    left: Mat6,
    right: Mat6,
    inverse: Mat6,
}

impl LinearRelaxation {
    pub fn new(m: &Mat6, k: &Mat6, eps: f64) -> Result<Self> {
        let me = SymmetricEigen::new((m + m.transpose()) * 0.5);
        if me.eigenvalues.min() <= 0.0 {
            return Err(Error::Precondition(
                "inertia matrix is not positive definite".into(),
            ));
        }
        let sqrt = me.eigenvalues.map(f64::sqrt);
        let m_half = me.eigenvectors * Mat6::from_diagonal(&sqrt) * me.eigenvectors.transpose();
        let m_inv_half = me.eigenvectors
            * Mat6::from_diagonal(&sqrt.map(|s| 1.0 / s))
            * me.eigenvectors.transpose();
        let s = m_inv_half * k * m_inv_half;
        let se = SymmetricEigen::new((s + s.transpose()) * 0.5);
        if se.eigenvalues.min() <= 0.0 {
            return Err(Error::Precondition(
                "resistance matrix is not positive definite".into(),
            ));
        }
        let rates = se.eigenvalues / (eps * eps);
        let left = m_inv_half * se.eigenvectors;
        let right = se.eigenvectors.transpose() * m_half;
        let inverse = left * Mat6::from_diagonal(&rates.map(|r| 1.0 / r)) * right;
        Ok(Self {
            rates,
            left,
            right,
            inverse,
        })
    }

    /// Eigenvalues of `A` (decay rates).
    pub fn rates(&self) -> &Vec6 {
        &self.rates
    }

    pub fn min_rate(&self) -> f64 {
        self.rates.min()
    }

    /// `A⁻¹ v`.
    pub fn solve(&self, v: &Vec6) -> Vec6 {
        self.inverse * v
    }

    /// `A v`.
    pub fn apply(&self, v: &Vec6) -> Vec6 {
        self.left * self.rates.component_mul(&(self.right * v))
    }

    /// `φ_k(−A τ) v`.
    pub fn phi_apply(&self, k: usize, tau: f64, v: &Vec6) -> Vec6 {
        let d = self.rates.map(|r| phi(k, -r * tau));
        self.left * d.component_mul(&(self.right * v))
    }

    /// Exact solution of `W' = −A W + g` (constant `g`) after time `tau`.
    pub fn propagate(&self, w: &Vec6, g: &Vec6, tau: f64) -> Vec6 {
        self.phi_apply(0, tau, w) + self.phi_apply(1, tau, g) * tau
    }
}
