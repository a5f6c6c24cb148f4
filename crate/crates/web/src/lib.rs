#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Browser bindings: quasi-static motion of a preset filament, a slice of its
//! perturbation flow, and the energy decay of the relaxation model.
//!
//! Every export takes plain JSON/number arguments and returns a JSON string,
//! either the result or `{"error": "..."}`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use filstokes::curves::{place, resample_parametric, Pose, Preset};
use filstokes::dynamics::{
    limit_rhs, simulate_relaxation, LimitSettings, RelaxationModel, RelaxationState, SystemState,
};
use filstokes::flowfield::{perturbation_field, GridSpec};
use filstokes::flows::Flow;
use filstokes::mobility::quasistatic;
use filstokes::svg::field_slice;
use filstokes::{Error, Result, Vec3};

const NODES: usize = 128;

fn preset(json: &str) -> Result<Preset> {
    let p: Preset = serde_json::from_str(json)?;
    p.validate()?;
    Ok(p)
}

fn flow(json: &str) -> Result<Flow> {
    Ok(serde_json::from_str(json)?)
}

fn pose(axis: [f64; 3], angle: f64) -> Result<Pose> {
    let a = Vec3::from(axis);
    if angle == 0.0 || a.norm() == 0.0 {
        return Ok(Pose::identity());
    }
    Ok(Pose::from_axis_angle(Vec3::zeros(), a, angle))
}

fn respond(r: Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

pub fn quasistatic_json(
    preset_json: &str,
    flow_json: &str,
    axis: [f64; 3],
    angle: f64,
) -> Result<Value> {
    let curve = resample_parametric(&preset(preset_json)?, NODES)?;
    let curve = filstokes::curves::recenter(&curve).0;
    let pose = pose(axis, angle)?;
    let placed = place(&curve, &pose)?;
    let q = quasistatic(&placed, &pose.translation, &flow(flow_json)?, 0.0)?;
    let k = q.resistance.matrix();
    Ok(json!({
        "linear": q.twist.linear.as_slice(),
        "angular": q.twist.angular.as_slice(),
        "load": q.load.to_vector().as_slice(),
        "resistance": (0..6).map(|i| (0..6).map(|j| k[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "condition_number": q.resistance.condition_number(),
        "nodes": placed.nodes.iter().map(|x| [x.x, x.y, x.z]).collect::<Vec<_>>(),
    }))
}

/// SVG of `|û^p|` on the plane `z = height` over `[-extent, extent]²`.
pub fn field_slice_svg(
    preset_json: &str,
    flow_json: &str,
    axis: [f64; 3],
    angle: f64,
    height: f64,
    extent: f64,
    n: usize,
) -> Result<Value> {
    if !(2..=96).contains(&n) || !(extent > 0.0) {
        return Err(Error::Config(
            "resolution must lie in 2..=96 and extent be positive".into(),
        ));
    }
    let curve = filstokes::curves::recenter(&resample_parametric(&preset(preset_json)?, NODES)?).0;
    let flow = flow(flow_json)?;
    let curves = [curve];
    let mut state = SystemState::new(&[pose(axis, angle)?], &curves, 0.0)?;
    let twists = limit_rhs(&state, &flow, &curves)?;
    state.bodies[0].twist = twists[0];
    let spacing = 2.0 * extent / (n - 1) as f64;
    let grid = GridSpec {
        origin: [-extent, -extent, height],
        spacing,
        dims: [n, n, 1],
    };
    let field = perturbation_field(&state, &flow, &curves, &grid, None)?;
    let svg = field_slice(&field, 0, &format!("perturbation speed at z = {height}"))?;
    Ok(
        json!({ "svg": svg, "max_speed": field.velocity.iter().map(|u| u.norm()).fold(0.0, f64::max) }),
    )
}

/// Energy `E`, `Z` and `|Y − Y♭|` of a frozen-coefficient relaxation run
/// started at rest, sampled over `steps` steps of the predicted time scale.
pub fn relaxation_series(
    preset_json: &str,
    flow_json: &str,
    eps: f64,
    steps: usize,
) -> Result<Value> {
    if !(eps > 0.0 && eps < 1.0) || !(2..=5000).contains(&steps) {
        return Err(Error::Config(
            "eps must lie in (0, 1) and steps in 2..=5000".into(),
        ));
    }
    let curve = filstokes::curves::recenter(&resample_parametric(&preset(preset_json)?, NODES)?).0;
    let flow = flow(flow_json)?;
    let curves = [curve];
    let state = SystemState::new(&[Pose::identity()], &curves, 0.0)?;
    let model =
        RelaxationModel::from_filaments(eps, &curves, &[Default::default()], &[1.0])?.frozen();
    let rate = RelaxationState::new(&state, None, &model, &flow, &curves)?
        .min_generalized_eigenvalue()?
        / (eps * eps);
    let dt = 0.1 / rate;
    let traj = simulate_relaxation(
        &state,
        None,
        &model,
        &flow,
        &curves,
        &LimitSettings::new(dt * steps as f64, dt),
    )?;
    let energy = |f: fn(&filstokes::dynamics::EnergyDiagnostic) -> f64| -> Vec<f64> {
        traj.snapshots
            .iter()
            .map(|s| s.energy.as_ref().map_or(f64::NAN, f))
            .collect()
    };
    Ok(json!({
        "t": traj.times(),
        "E": energy(|e| e.e),
        "Z": energy(|e| e.z),
        "deviation": traj.layer_deviation(),
        "predicted_rate": rate,
        "fitted_rate": traj.decay_rate(),
    }))
}

#[wasm_bindgen]
pub fn quasistatic_twist(
    preset_json: &str,
    flow_json: &str,
    ax: f64,
    ay: f64,
    az: f64,
    angle: f64,
) -> String {
    respond(quasistatic_json(
        preset_json,
        flow_json,
        [ax, ay, az],
        angle,
    ))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn flow_slice(
    preset_json: &str,
    flow_json: &str,
    ax: f64,
    ay: f64,
    az: f64,
    angle: f64,
    height: f64,
    extent: f64,
    n: usize,
) -> String {
    respond(field_slice_svg(
        preset_json,
        flow_json,
        [ax, ay, az],
        angle,
        height,
        extent,
        n,
    ))
}

#[wasm_bindgen]
pub fn energy_decay(preset_json: &str, flow_json: &str, eps: f64, steps: usize) -> String {
    respond(relaxation_series(preset_json, flow_json, eps, steps))
}
