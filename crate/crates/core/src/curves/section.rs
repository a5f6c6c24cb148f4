use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::Curve;
use crate::{so3, Error, Mat3, Result};

/// Cross-section shape of a reference filament (unit-thickness scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum SectionProfile {
    /// `Ψ(s, p) = radius · p`.
    Disc { radius: f64 },
    /// `Ψ(s, p) = (a p₁, b p₂)`.
    Ellipse { a: f64, b: f64 },
}

impl Default for SectionProfile {
    fn default() -> Self {
        SectionProfile::Disc { radius: 1.0 }
    }
}

/// Cross-section data of an `ε`-thick filament around its centerline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionSpec {
    pub thickness: f64,
    #[serde(default)]
    pub profile: SectionProfile,
}

impl CrossSectionSpec {
    pub fn new(thickness: f64, profile: SectionProfile) -> Result<Self> {
        let spec = Self { thickness, profile };
        spec.validate()?;
        Ok(spec)
    }

    pub fn disc(thickness: f64, radius: f64) -> Result<Self> {
        Self::new(thickness, SectionProfile::Disc { radius })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.thickness > 0.0 && self.thickness < 1.0) {
            return Err(Error::Precondition(format!(
                "thickness must lie in (0, 1), got {}",
                self.thickness
            )));
        }
        let ok = match self.profile {
            SectionProfile::Disc { radius } => radius > 0.0,
            SectionProfile::Ellipse { a, b } => a > 0.0 && b > 0.0,
        };
        if !ok {
            return Err(Error::DegenerateInput("cross-section has zero area".into()));
        }
        Ok(())
    }

    /// Shape map `Ψ(s, ·)` on the unit disc.
    pub fn shape(&self, _s: f64, p: Vector2<f64>) -> Vector2<f64> {
        match self.profile {
            SectionProfile::Disc { radius } => p * radius,
            SectionProfile::Ellipse { a, b } => Vector2::new(a * p.x, b * p.y),
        }
    }

    /// Area `|Ψ(s, B₁)|` of the reference section (before the `ε²` scaling).
    pub fn area(&self, _s: f64) -> f64 {
        match self.profile {
            SectionProfile::Disc { radius } => PI * radius * radius,
            SectionProfile::Ellipse { a, b } => PI * a * b,
        }
    }

    /// Section frame at node `j`: a rotation with `R e₃ = τ`.
    pub fn frame(&self, curve: &Curve, j: usize) -> Mat3 {
        so3::align_e3(&curve.tangents[j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{resample_parametric, Preset};

    #[test]
    fn frame_is_rotation_aligned_with_tangent() {
        let c = resample_parametric(&Preset::Trefoil { scale: 1.0 }, 64).unwrap();
        let x = CrossSectionSpec::disc(0.1, 1.0).unwrap();
        for j in 0..c.len() {
            let r = x.frame(&c, j);
            let (o, d) = so3::orthogonality_defect(&r);
            assert!(o < 1e-12 && d < 1e-12);
            assert!((r * crate::Vec3::z() - c.tangents[j]).norm() < 1e-12);
        }
        assert_eq!(x.shape(0.3, Vector2::zeros()), Vector2::zeros());
    }

    #[test]
    fn rejects_bad_thickness_and_zero_area() {
        assert!(CrossSectionSpec::disc(1.0, 1.0).is_err());
        assert!(CrossSectionSpec::disc(0.0, 1.0).is_err());
        assert!(matches!(
            CrossSectionSpec::disc(0.1, 0.0),
            Err(Error::DegenerateInput(_))
        ));
    }
}
