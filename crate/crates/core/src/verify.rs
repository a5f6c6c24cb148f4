//! Self-check suites runnable from the command line.

use std::f64::consts::PI;

use serde::Serialize;

use crate::curves::{place, resample_parametric, Curve, Pose, Preset, TwistVelocity};
use crate::dynamics::{
    richardson_ratio, simulate_limit, simulate_relaxation, BodyState, LimitSettings,
    RelaxationModel, RelaxationState, SystemState,
};
use crate::flowfield::{
    divergence_check, fit_inverse_log, near_field_log_law, perturbation_field, total_line_force,
    GridSpec, LineMeasureDensity,
};
use crate::flows::Flow;
use crate::kernels::{drag_matrix, oseen, s0};
use crate::mobility::{
    conjugate_resistance, faxen_load, line_pairing, quasistatic, resistance_matrix,
};
use crate::random::Sampler;
use crate::{Error, Mat3, Mat6, Result, Vec3, Vec6};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Kernels,
    Mobility,
    Dynamics,
    Flowfield,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Kernels,
        Suite::Mobility,
        Suite::Dynamics,
        Suite::Flowfield,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Kernels => "kernels",
            Suite::Mobility => "mobility",
            Suite::Dynamics => "dynamics",
            Suite::Flowfield => "flowfield",
        }
    }

    /// Suites selected by a name; `all` selects every suite.
    pub fn parse(name: &str) -> Result<Vec<Suite>> {
        match name {
            "all" => Ok(Self::ALL.to_vec()),
            _ => Self::ALL
                .into_iter()
                .find(|s| s.name() == name)
                .map(|s| vec![s])
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown suite {name:?} (kernels, mobility, dynamics, flowfield, all)"
                    ))
                }),
        }
    }
}

/// One measured quantity against its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    /// One line per check plus a total.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!(
                "{tag} {}/{}: {:.3e} (tol {:.1e})",
                c.suite.name(),
                c.name,
                c.value,
                c.tolerance
            ));
            if let Some(e) = &c.error {
                s.push_str(&format!(" [{e}]"));
            }
            s.push('\n');
        }
        s.push_str(&format!("{} passed, {} failed\n", self.passed, self.failed));
        s
    }
}

enum Bound {
    Below(f64),
    Above(f64),
    Within(f64, f64),
}

fn check(suite: Suite, name: &str, bound: Bound, value: Result<f64>) -> Check {
    let (value, error) = match value {
        Ok(v) => (v, None),
        Err(e) => (f64::NAN, Some(e.to_string())),
    };
    let (passed, tolerance) = match bound {
        Bound::Below(t) => (value <= t, t),
        Bound::Above(t) => (value >= t, t),
        Bound::Within(c, w) => ((value - c).abs() <= w, w),
    };
    Check {
        suite,
        name: name.into(),
        passed,
        value,
        tolerance,
        error,
    }
}

fn circle(n: usize) -> Result<Curve> {
    resample_parametric(&Preset::Circle { radius: 1.0 }, n)
}

fn kernels(seed: u64) -> Vec<Check> {
    let s = Suite::Kernels;
    let mut rng = Sampler::new(seed);
    let dirs: Vec<Vec3> = (0..2000).map(|_| rng.unit_vector()).collect();
    let identity = dirs.iter().try_fold(0.0f64, |m, p| {
        Ok(m.max((s0(p)? * drag_matrix(p) - Mat3::identity()).amax()))
    });
    let drag = dirs
        .iter()
        .map(|p| {
            let v = rng.unit_vector();
            v.dot(&(drag_matrix(p) * v))
        })
        .fold(f64::INFINITY, f64::min);
    let scaling = dirs.iter().try_fold(0.0f64, |m, p| {
        let r = 2.5;
        Ok(m.max((oseen(&(p * r))? * r - oseen(p)?).amax()))
    });
    vec![
        check(s, "s0_times_k_is_identity", Bound::Below(1e-12), identity),
        check(
            s,
            "drag_lower_bound",
            Bound::Above(4.0 * PI - 1e-10),
            Ok(drag),
        ),
        check(s, "oseen_homogeneity", Bound::Below(1e-14), scaling),
    ]
}

fn circle_closed_form_error() -> Result<f64> {
    let k = resistance_matrix(&circle(512)?, &Vec3::zeros())?;
    let p2 = PI * PI;
    let exact = Mat6::from_diagonal(&Vec6::new(
        6.0 * p2,
        6.0 * p2,
        8.0 * p2,
        4.0 * p2,
        4.0 * p2,
        4.0 * p2,
    ));
    Ok((k.0 - exact).amax() / exact.amax())
}

fn coercivity_margin(rng: &mut Sampler, curves: usize, twists: usize) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for _ in 0..curves {
        let c = rng.curve(128)?;
        let k = resistance_matrix(&c, &Vec3::zeros())?;
        for _ in 0..twists {
            let t = rng.twist(1.0);
            let y = t.to_vector();
            let quad = y.dot(&(k.0 * y));
            let field: Vec<Vec3> = c
                .nodes
                .iter()
                .map(|x| t.velocity_at(&Vec3::zeros(), x))
                .collect();
            let sq: f64 = field
                .iter()
                .zip(&c.arc_weights)
                .map(|(v, w)| v.norm_squared() * w)
                .sum();
            worst = worst.min((quad - 2.0 * PI * sq) / k.0.norm());
            let pairing = line_pairing(&c, &field, &field)?;
            worst = worst.min(1e-8 - (pairing - quad).abs() / k.0.norm());
        }
    }
    Ok(worst)
}

fn conjugation_error(rng: &mut Sampler, poses: usize) -> Result<f64> {
    let c = rng.curve(128)?;
    let body = resistance_matrix(&c, &Vec3::zeros())?;
    let mut worst = 0.0f64;
    for _ in 0..poses {
        let pose = rng.pose(2.0);
        let world = resistance_matrix(&place(&c, &pose)?, &pose.translation)?;
        let conj = conjugate_resistance(&body, &pose.rotation)?;
        worst = worst.max((world.0 - conj.0).amax() / world.0.amax());
    }
    Ok(worst)
}

fn tracer_error(rng: &mut Sampler, curves: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..curves {
        let c = rng.curve(128)?;
        let u = rng.vector(2.0);
        let flow = Flow::Constant { velocity: u.into() };
        let q = quasistatic(&c, &Vec3::zeros(), &flow, 0.0)?;
        let err = (q.twist.linear - u).amax().max(q.twist.angular.amax());
        worst = worst.max(err / u.amax().max(1.0));
    }
    Ok(worst)
}

fn mobility(seed: u64) -> Vec<Check> {
    let s = Suite::Mobility;
    let mut rng = Sampler::new(seed);
    vec![
        check(
            s,
            "circle_closed_form",
            Bound::Below(1e-8),
            circle_closed_form_error(),
        ),
        check(
            s,
            "coercivity_margin",
            Bound::Above(-1e-8),
            coercivity_margin(&mut rng, 10, 20),
        ),
        check(
            s,
            "frame_conjugation",
            Bound::Below(1e-9),
            conjugation_error(&mut rng, 10),
        ),
        check(
            s,
            "passive_tracer",
            Bound::Below(1e-10),
            tracer_error(&mut rng, 5),
        ),
    ]
}

fn constant_flow_error() -> Result<f64> {
    let curves = vec![circle(64)?];
    let u = Vec3::new(0.3, -1.0, 0.5);
    let h0 = Vec3::new(1.0, 2.0, 3.0);
    let s = SystemState::new(&[Pose::from_axis_angle(h0, Vec3::x(), 0.4)], &curves, 0.0)?;
    let traj = simulate_limit(
        &s,
        &Flow::Constant { velocity: u.into() },
        &curves,
        &LimitSettings::new(1.0, 0.1),
    )?;
    let h = traj
        .last()
        .map(|s| s.bodies[0].pose.translation)
        .unwrap_or(h0);
    Ok((h - h0 - u).norm())
}

fn vortex_ratio() -> Result<f64> {
    let curves = vec![resample_parametric(&Preset::Circle { radius: 0.1 }, 64)?];
    let s = SystemState::new(
        &[Pose::from_translation(Vec3::new(1.0, 0.0, 0.0))],
        &curves,
        0.0,
    )?;
    richardson_ratio(
        &s,
        &Flow::Vortex {
            omega: [0.0, 0.0, 1.0],
        },
        &curves,
        1.0,
        0.1,
    )
}

fn relaxation_setup(eps: f64) -> Result<(Vec<Curve>, RelaxationModel, SystemState)> {
    let curves = vec![circle(64)?];
    let model =
        RelaxationModel::from_filaments(eps, &curves, &[Default::default()], &[1.0])?.frozen();
    let s = SystemState::new(
        &[Pose::from_axis_angle(
            Vec3::zeros(),
            Vec3::new(1.0, 0.3, 0.0),
            0.8,
        )],
        &curves,
        0.0,
    )?;
    Ok((curves, model, s))
}

fn frozen_rate_mismatch() -> Result<f64> {
    let (curves, model, s) = relaxation_setup(0.1)?;
    let flow = Flow::Shear { rate: 1.0 };
    let twists = [TwistVelocity::new(
        Vec3::new(1.0, -0.5, 0.3),
        Vec3::new(0.2, 0.4, -1.0),
    )];
    let r0 = RelaxationState::new(&s, Some(&twists), &model, &flow, &curves)?;
    let predicted = r0.min_generalized_eigenvalue()? / (model.eps * model.eps);
    let dt = 0.1 / predicted;
    let traj = simulate_relaxation(
        &s,
        Some(&twists),
        &model,
        &flow,
        &curves,
        &LimitSettings::new(200.0 * dt, dt),
    )?;
    let rate = traj
        .decay_rate()
        .ok_or_else(|| Error::DegenerateInput("no decay window".into()))?;
    Ok((rate / predicted - 1.0).abs())
}

fn force_free_residual() -> Result<f64> {
    let curves = vec![circle(128)?];
    let flow = Flow::Shear { rate: 1.0 };
    let s = SystemState::new(
        &[Pose::from_axis_angle(Vec3::zeros(), Vec3::x(), 0.7)],
        &curves,
        0.0,
    )?;
    let traj = simulate_limit(&s, &flow, &curves, &LimitSettings::new(1.0, 0.1))?;
    let mut worst = 0.0f64;
    for snap in &traj.snapshots {
        let b = &snap.bodies[0];
        let placed = place(&curves[0], &b.pose)?;
        let d = LineMeasureDensity::from_twist(
            &placed,
            &b.pose.translation,
            &b.twist,
            &flow,
            snap.time,
        )?;
        let load = faxen_load(&placed, &b.pose.translation, &flow, snap.time).norm();
        worst = worst.max(total_line_force(&d).norm() / load.max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

fn dynamics(_seed: u64) -> Vec<Check> {
    let s = Suite::Dynamics;
    vec![
        check(
            s,
            "constant_flow_translation",
            Bound::Below(1e-12),
            constant_flow_error(),
        ),
        check(
            s,
            "vortex_richardson_ratio",
            Bound::Within(16.0, 2.0),
            vortex_ratio(),
        ),
        check(
            s,
            "frozen_layer_rate",
            Bound::Below(0.2),
            frozen_rate_mismatch(),
        ),
        check(
            s,
            "force_free_measure",
            Bound::Below(1e-10),
            force_free_residual(),
        ),
    ]
}

fn translating_ring() -> Result<(SystemState, Vec<Curve>)> {
    let curves = vec![circle(256)?];
    let mut s = SystemState::new(&[Pose::identity()], &curves, 0.0)?;
    s.bodies[0] = BodyState {
        pose: Pose::identity(),
        twist: TwistVelocity::new(Vec3::z(), Vec3::zeros()),
    };
    Ok((s, curves))
}

fn divergence_ratio() -> Result<f64> {
    let (s, curves) = translating_ring()?;
    let mut d = Vec::new();
    for n in [17usize, 33] {
        let h = 2.0 / (n - 1) as f64;
        let grid = GridSpec::cube(Vec3::new(0.0, 0.0, 1.5), 1.0 + h, n + 2);
        d.push(divergence_check(&perturbation_field(
            &s,
            &Flow::Still,
            &curves,
            &grid,
            Some(0.3),
        )?)?);
    }
    Ok(d[0] / d[1])
}

fn monopole_mismatch() -> Result<f64> {
    let (s, curves) = translating_ring()?;
    let d = LineMeasureDensity::from_twist(
        &curves[0],
        &Vec3::zeros(),
        &s.bodies[0].twist,
        &Flow::Still,
        0.0,
    )?;
    let x = Vec3::new(60.0, 0.0, 80.0);
    let monopole = oseen(&x)? * total_line_force(&d);
    Ok((d.velocity(&x)? - monopole).norm() / monopole.norm())
}

fn log_law_mismatch() -> Result<f64> {
    let rows = near_field_log_law(&circle(256)?, &Vec3::z(), &[1e-2, 1e-3, 1e-4, 1e-5])?;
    fit_inverse_log(&rows)
        .map(|(_, dev)| dev)
        .ok_or_else(|| Error::DegenerateInput("log-law fit failed".into()))
}

fn flowfield(_seed: u64) -> Vec<Check> {
    let s = Suite::Flowfield;
    vec![
        check(
            s,
            "divergence_refinement_ratio",
            Bound::Within(4.0, 1.0),
            divergence_ratio(),
        ),
        check(
            s,
            "far_field_monopole",
            Bound::Below(0.05),
            monopole_mismatch(),
        ),
        check(
            s,
            "near_field_log_law",
            Bound::Below(0.3),
            log_law_mismatch(),
        ),
    ]
}

/// Runs the selected suites with a seeded random stream.
pub fn run(suites: &[Suite], seed: u64) -> VerifyReport {
    let checks: Vec<Check> = suites
        .iter()
        .flat_map(|s| match s {
            Suite::Kernels => kernels(seed),
            Suite::Mobility => mobility(seed),
            Suite::Dynamics => dynamics(seed),
            Suite::Flowfield => flowfield(seed),
        })
        .collect();
    let passed = checks.iter().filter(|c| c.passed).count();
    VerifyReport {
        failed: checks.len() - passed,
        passed,
        checks,
    }
}
