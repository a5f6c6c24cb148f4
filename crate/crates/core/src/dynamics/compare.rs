use serde::Serialize;

use crate::curves::Curve;
use crate::{Error, Result};

use super::{BodyState, Trajectory};

/// Window `[lo, hi]` of `|Y − Y♭| / |Y(0) − Y♭(0)|` used for the decay fit.
pub const DECAY_WINDOW: (f64, f64) = (1e-6, 0.5);

/// Maximal displacement of a node between two placements of the same
/// reference curves.
pub fn pose_error(curves: &[Curve], a: &[BodyState], b: &[BodyState]) -> f64 {
    let mut err: f64 = 0.0;
    for ((c, x), y) in curves.iter().zip(a).zip(b) {
        for node in &c.nodes {
            err = err.max((x.pose.apply(node) - y.pose.apply(node)).norm());
        }
    }
    err
}

/// Least-squares decay rate `−d log|·|/dt` over the leading monotone
/// stretch of `values` inside [`DECAY_WINDOW`]. When the tail is flat
/// (varies by less than 2×), samples within a factor 100 of it are skipped.
pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Option<f64> {
    let v0 = *values.first()?;
    if !(v0 > 0.0) || times.len() != values.len() {
        return None;
    }
    let tail = &values[values.len() - (values.len() / 10).max(3).min(values.len())..];
    let tmin = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let tmax = tail.iter().copied().fold(0.0, f64::max);
    let (mut lo, hi) = DECAY_WINDOW;
    if tmax < 2.0 * tmin {
        lo = lo.max(100.0 * tmin / v0);
    }
    let mut pts = Vec::new();
    let mut prev = f64::INFINITY;
    for (t, v) in times.iter().zip(values) {
        let r = v / v0;
        if (r >= prev || r < lo) && !pts.is_empty() {
            break;
        }
        prev = r;
        if r <= hi && r >= lo {
            pts.push((*t, v.ln()));
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    pub pose_error: Vec<f64>,
    pub sup_pose_error: f64,
    /// `|Y − Ŷ|`.
    pub twist_error: Vec<f64>,
    /// `|Y − Y♭|`.
    pub relaxation_to_faxen: Vec<f64>,
    /// `|Y♭ − Ỹ|`, identically zero for the surrogate coefficients.
    pub faxen_to_quasistatic: Vec<f64>,
    /// `|Ỹ − Ŷ|`.
    pub quasistatic_to_limit: Vec<f64>,
    pub decay_rate: Option<f64>,
}

fn stacked_difference(a: &[BodyState], b: &[crate::curves::TwistVelocity]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.twist.to_vector() - y.to_vector()).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Errors between a relaxation trajectory and a limit trajectory sampled on
/// the same time grid.
pub fn compare_trajectories(
    relax: &Trajectory,
    limit: &Trajectory,
    curves: &[Curve],
) -> Result<ComparisonReport> {
    if relax.snapshots.len() != limit.snapshots.len() {
        return Err(Error::Precondition(format!(
            "time grids differ: {} vs {} samples",
            relax.snapshots.len(),
            limit.snapshots.len()
        )));
    }
    let mut report = ComparisonReport {
        times: Vec::new(),
        pose_error: Vec::new(),
        sup_pose_error: 0.0,
        twist_error: Vec::new(),
        relaxation_to_faxen: Vec::new(),
        faxen_to_quasistatic: Vec::new(),
        quasistatic_to_limit: Vec::new(),
        decay_rate: None,
    };
    for (a, b) in relax.snapshots.iter().zip(&limit.snapshots) {
        if (a.time - b.time).abs() > 1e-12 * a.time.abs().max(1.0) {
            return Err(Error::Precondition(format!(
                "time grids differ at t = {}",
                a.time
            )));
        }
        if a.bodies.len() != b.bodies.len() || a.bodies.len() != curves.len() {
            return Err(Error::LengthMismatch {
                expected: curves.len(),
                got: a.bodies.len().min(b.bodies.len()),
            });
        }
        let limit_twists: Vec<_> = b.bodies.iter().map(|x| x.twist).collect();
        let faxen = a
            .faxen
            .clone()
            .unwrap_or_else(|| a.bodies.iter().map(|x| x.twist).collect());
        let e = pose_error(curves, &a.bodies, &b.bodies);
        report.times.push(a.time);
        report.pose_error.push(e);
        report.sup_pose_error = report.sup_pose_error.max(e);
        report
            .twist_error
            .push(stacked_difference(&a.bodies, &limit_twists));
        report
            .relaxation_to_faxen
            .push(stacked_difference(&a.bodies, &faxen));
        report.faxen_to_quasistatic.push(0.0);
        report.quasistatic_to_limit.push(
            faxen
                .iter()
                .zip(&limit_twists)
                .map(|(x, y)| (x.to_vector() - y.to_vector()).norm_squared())
                .sum::<f64>()
                .sqrt(),
        );
    }
    report.decay_rate = fit_decay_rate(&report.times, &report.relaxation_to_faxen);
    Ok(report)
}
