//! Zero-thickness limit dynamics of rigid filaments immersed in a steady
//! Stokes flow.
//!
//! Each filament is represented by its centerline curve. The crate assembles
//! the renormalized 6×6 resistance matrices and Faxén loads by line
//! quadrature, integrates the decoupled first-order limit dynamics on
//! `R³ × SO(3)`, integrates the singularly perturbed inertial relaxation
//! model with an exponential integrator, and evaluates the leading-order
//! perturbation flow generated by the centerlines.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`curves`] | arc-length centerlines, poses, twists, cross sections |
//! | [`kernels`] | Stokeslet, pressure kernel, local drag matrices |
//! | [`flows`] | analytic background flows |
//! | [`mobility`] | line pairing, resistance matrices, Faxén and buoyancy loads |
//! | [`dynamics`] | limit and relaxation integrators, trajectories, energy |
//! | [`flowfield`] | line-measure velocity/pressure fields and diagnostics |
//! | [`scenario`] | JSON configuration, runs, sweeps and file outputs |
//! | [`verify`] | self-check suites used by `filstokes verify` |

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curves;
pub mod dynamics;
pub mod error;
pub mod flowfield;
pub mod flows;
pub mod kernels;
pub mod mobility;
pub mod par;
pub mod quadrature;
pub mod random;
pub mod scenario;
pub mod so3;
pub mod svg;
pub mod verify;

pub use error::{Error, Result};

/// 3-vector of `f64`.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 matrix of `f64`.
pub type Mat3 = nalgebra::Matrix3<f64>;
/// 6-vector, used for twists and wrenches.
pub type Vec6 = nalgebra::Vector6<f64>;
/// 6×6 matrix, used for resistance and inertia blocks.
pub type Mat6 = nalgebra::Matrix6<f64>;
