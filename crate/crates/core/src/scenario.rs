//! JSON run configurations, scenario execution, sweeps and file outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::curves::{
    place_unchecked, recenter, resample_arclength, resample_parametric, Curve, Pose, Preset,
    SectionProfile, TwistVelocity, DEFAULT_NODES, MIN_NODES,
};
use crate::dynamics::{
    compare_trajectories, limit_rhs, simulate_limit, simulate_relaxation, Coefficients,
    LimitSettings, RelaxationModel, RelaxationState, SystemState, Trajectory,
};
use crate::flowfield::{divergence_check, perturbation_field, FieldGrid, GridSpec};
use crate::flows::Flow;
use crate::mobility::{faxen_load, resistance_matrix};
use crate::svg::{field_slice, LinePlot, Series};
use crate::{par, so3, Error, Result, Vec3};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "FILSTOKES_THREADS";

/// Centerline source: a named preset, inline samples or a sample file
/// (one `x y z` or `x,y,z` point per line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurveSource {
    Preset(Preset),
    Samples {
        samples: Vec<[f64; 3]>,
        #[serde(default)]
        closed: bool,
    },
    File {
        file: PathBuf,
        #[serde(default)]
        closed: bool,
    },
}

/// Initial placement; the rotation is a unit quaternion `[w, x, y, z]` or
/// an axis-angle pair (identity when neither is given).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quaternion: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

impl PoseSpec {
    pub fn to_pose(&self) -> Result<Pose> {
        let rotation = match (self.quaternion, self.axis, self.angle) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(Error::Config(
                    "give either a quaternion or an axis-angle pair, not both".into(),
                ))
            }
            (Some([w, x, y, z]), None, None) => {
                let n = (w * w + x * x + y * y + z * z).sqrt();
                if (n - 1.0).abs() > 1e-6 {
                    return Err(Error::Config(format!(
                        "quaternion must have unit norm, got {n}"
                    )));
                }
                so3::from_quaternion(w / n, x / n, y / n, z / n)
            }
            (None, Some(axis), Some(angle)) => {
                let a = Vec3::from(axis);
                if !(a.norm() > 0.0) || !angle.is_finite() {
                    return Err(Error::Config(
                        "axis must be non-zero and angle finite".into(),
                    ));
                }
                so3::from_axis_angle(&a, angle)
            }
            (None, None, None) => crate::Mat3::identity(),
            _ => {
                return Err(Error::Config(
                    "axis and angle must be given together".into(),
                ))
            }
        };
        if self.translation.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("translation must be finite".into()));
        }
        Pose::new(Vec3::from(self.translation), rotation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistSpec {
    #[serde(default)]
    pub linear: [f64; 3],
    #[serde(default)]
    pub angular: [f64; 3],
}

impl From<TwistSpec> for TwistVelocity {
    fn from(t: TwistSpec) -> Self {
        TwistVelocity::new(Vec3::from(t.linear), Vec3::from(t.angular))
    }
}

fn default_nodes() -> usize {
    DEFAULT_NODES
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    pub curve: CurveSource,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub pose: PoseSpec,
    /// Relaxation model only; rest by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_twist: Option<TwistSpec>,
    #[serde(default)]
    pub section: SectionProfile,
    #[serde(default = "one")]
    pub density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Limit,
    Relaxation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientMode {
    #[default]
    Full,
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "yes")]
    pub trajectory: bool,
    #[serde(default)]
    pub field: bool,
    #[serde(default = "yes")]
    pub plots: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            trajectory: true,
            field: false,
            plots: true,
        }
    }
}

/// A complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub bodies: Vec<BodySpec>,
    #[serde(default)]
    pub flow: Flow,
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default)]
    pub coefficients: CoefficientMode,
    #[serde(rename = "T", alias = "t_final")]
    pub t_final: f64,
    /// Defaults to `T / 1000`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision_threshold: Option<f64>,
    #[serde(default)]
    pub richardson: bool,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    /// Parses a configuration, or the `config` member of a run manifest.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if let Some(inner) = value
            .get("config")
            .filter(|_| value.get("filstokes_version").is_some())
        {
            return serde_json::from_value(inner.clone())
                .map_err(|e| Error::Config(format!("manifest config: {e}")));
        }
        let cfg: SimConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    /// Reads a configuration file; relative sample-file paths are resolved
    /// against its directory and inlined.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.inline_files(base)?;
        cfg.validate().map_err(|e| match e {
            Error::Config(msg) => match locate_key(&text, &msg) {
                Some(line) => Error::Config(format!("{}: line {line}: {msg}", path.display())),
                None => Error::Config(format!("{}: {msg}", path.display())),
            },
            e => e,
        })?;
        Ok(cfg)
    }

    /// Replaces sample-file sources by inline samples.
    pub fn inline_files(&mut self, base: &Path) -> Result<()> {
        for b in &mut self.bodies {
            if let CurveSource::File { file, closed } = &b.curve {
                let p = if file.is_absolute() {
                    file.clone()
                } else {
                    base.join(file)
                };
                let samples = read_samples(&p)?;
                b.curve = CurveSource::Samples {
                    samples,
                    closed: *closed,
                };
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(self.t_final / 1000.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.bodies.is_empty() {
            return bad("at least one body is required".into());
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return bad(format!("T must be positive, got {}", self.t_final));
        }
        if !(self.dt() > 0.0) || self.dt() > self.t_final {
            return bad(format!("dt must lie in (0, T], got {}", self.dt()));
        }
        match (self.model, self.eps) {
            (ModelKind::Relaxation, Some(e)) if e > 0.0 && e < 1.0 => {}
            (ModelKind::Relaxation, e) => {
                return bad(format!("relaxation needs eps in (0, 1), got {e:?}"))
            }
            _ => {}
        }
        if let Some(c) = self.collision_threshold {
            if !(c >= 0.0) {
                return bad("collision_threshold must be non-negative".into());
            }
        }
        for (i, b) in self.bodies.iter().enumerate() {
            if b.nodes < MIN_NODES {
                return bad(format!("body {i}: nodes must be ≥ {MIN_NODES}"));
            }
            if !(b.density > 0.0) {
                return bad(format!("body {i}: density must be positive"));
            }
            b.pose
                .to_pose()
                .map_err(|e| Error::Config(format!("body {i}: {e}")))?;
            if let CurveSource::Preset(p) = &b.curve {
                p.validate()
                    .map_err(|e| Error::Config(format!("body {i}: {e}")))?;
            }
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        Ok(())
    }

    /// Reference curves recentered on their barycenters.
    pub fn curves(&self) -> Result<Vec<Curve>> {
        self.bodies
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let c = match &b.curve {
                    CurveSource::Preset(p) => resample_parametric(p, b.nodes),
                    CurveSource::Samples { samples, closed } => {
                        let pts: Vec<Vec3> = samples.iter().map(|s| Vec3::from(*s)).collect();
                        resample_arclength(&pts, b.nodes, *closed)
                    }
                    CurveSource::File { file, .. } => Err(Error::Config(format!(
                        "sample file {} was not loaded",
                        file.display()
                    ))),
                }
                .map_err(|e| Error::Config(format!("body {i}: {e}")))?;
                Ok(recenter(&c).0)
            })
            .collect()
    }

    pub fn poses(&self) -> Result<Vec<Pose>> {
        self.bodies.iter().map(|b| b.pose.to_pose()).collect()
    }

    pub fn initial_state(&self, curves: &[Curve]) -> Result<SystemState> {
        SystemState::new(&self.poses()?, curves, 0.0)
    }

    pub fn settings(&self) -> LimitSettings {
        LimitSettings {
            dt: self.dt(),
            t_final: self.t_final,
            collision_threshold: self.collision_threshold,
            richardson: self.richardson,
        }
    }

    pub fn relaxation_model(&self, curves: &[Curve]) -> Result<RelaxationModel> {
        let eps = self
            .eps
            .ok_or_else(|| Error::Config("relaxation model needs eps".into()))?;
        let profiles: Vec<SectionProfile> = self.bodies.iter().map(|b| b.section).collect();
        let densities: Vec<f64> = self.bodies.iter().map(|b| b.density).collect();
        let mut m = RelaxationModel::from_filaments(eps, curves, &profiles, &densities)?;
        if self.coefficients == CoefficientMode::Frozen {
            m.coefficients = Coefficients::Frozen;
        }
        Ok(m)
    }

    fn initial_twists(&self) -> Option<Vec<TwistVelocity>> {
        if self.bodies.iter().all(|b| b.initial_twist.is_none()) {
            return None;
        }
        Some(
            self.bodies
                .iter()
                .map(|b| b.initial_twist.map(Into::into).unwrap_or_default())
                .collect(),
        )
    }
}

const CONFIG_KEYS: [&str; 14] = [
    "quaternion",
    "collision_threshold",
    "translation",
    "density",
    "nodes",
    "angle",
    "axis",
    "eps",
    "dt",
    "T",
    "grid",
    "spacing",
    "dims",
    "bodies",
];

/// Line of the first key in `text` that a validation message names.
fn locate_key(text: &str, msg: &str) -> Option<usize> {
    let words: Vec<&str> = msg
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .collect();
    let key = CONFIG_KEYS.iter().find(|k| words.contains(k))?;
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map(|i| i + 1)
}

/// Points from a text file, one per line, separated by spaces or commas.
/// Blank lines and lines starting with `#` are skipped.
pub fn read_samples(path: &Path) -> Result<Vec<[f64; 3]>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), ln + 1)))?;
        if vals.len() != 3 {
            return Err(Error::Config(format!(
                "{}:{}: expected 3 coordinates, got {}",
                path.display(),
                ln + 1,
                vals.len()
            )));
        }
        out.push([vals[0], vals[1], vals[2]]);
    }
    Ok(out)
}

/// Thread cap from [`THREADS_ENV`].
pub fn thread_limit() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|n| *n > 0)
}

/// Summary of a finished run (the manifest minus the config echo).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub model: ModelKind,
    pub steps: usize,
    pub final_time: f64,
    pub halted_at_collision: bool,
    pub collision_time: Option<f64>,
    pub collision_distance: Option<f64>,
    pub richardson_error: Option<f64>,
    /// Fitted initial-layer decay rate (relaxation).
    pub decay_rate: Option<f64>,
    /// `λ_min(M⁻¹K) / ε²` at `t = 0` (relaxation).
    pub predicted_rate: Option<f64>,
    /// Sup-norm node displacement against the limit run (relaxation).
    pub sup_pose_error: Option<f64>,
    pub field_divergence: Option<f64>,
    pub files: Vec<String>,
}

/// Result of [`simulate`]: the trajectory and its diagnostics.
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub limit: Option<Trajectory>,
    pub summary: RunSummary,
    pub curves: Vec<Curve>,
}

/// Decay rate of `|Y − Y♭|` from a short run that resolves the layer.
pub fn layer_probe(
    cfg: &SimConfig,
    state: &SystemState,
    model: &RelaxationModel,
    curves: &[Curve],
) -> Result<(Option<f64>, f64)> {
    let twists = cfg.initial_twists();
    let r0 = RelaxationState::new(state, twists.as_deref(), model, &cfg.flow, curves)?;
    let rate = r0.min_generalized_eigenvalue()? / (model.eps * model.eps);
    let dt = 0.2 / rate;
    let horizon = 100.0 * dt;
    let settings = LimitSettings {
        dt,
        t_final: horizon,
        collision_threshold: cfg.collision_threshold,
        richardson: false,
    };
    let traj = simulate_relaxation(
        state,
        twists.as_deref(),
        model,
        &cfg.flow,
        curves,
        &settings,
    )?;
    Ok((traj.decay_rate(), rate))
}

/// Runs the configured model without writing files.
pub fn simulate(cfg: &SimConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let curves = cfg.curves()?;
    let state = cfg.initial_state(&curves)?;
    let settings = cfg.settings();
    let mut summary = RunSummary {
        model: cfg.model,
        steps: 0,
        final_time: 0.0,
        halted_at_collision: false,
        collision_time: None,
        collision_distance: None,
        richardson_error: None,
        decay_rate: None,
        predicted_rate: None,
        sup_pose_error: None,
        field_divergence: None,
        files: Vec::new(),
    };
    let (trajectory, limit) = match cfg.model {
        ModelKind::Limit => (simulate_limit(&state, &cfg.flow, &curves, &settings)?, None),
        ModelKind::Relaxation => {
            let model = cfg.relaxation_model(&curves)?;
            let twists = cfg.initial_twists();
            let relax = simulate_relaxation(
                &state,
                twists.as_deref(),
                &model,
                &cfg.flow,
                &curves,
                &settings,
            )?;
            let limit = simulate_limit(
                &state,
                &cfg.flow,
                &curves,
                &LimitSettings {
                    richardson: false,
                    ..settings
                },
            )?;
            let (rate, predicted) = layer_probe(cfg, &state, &model, &curves)?;
            summary.decay_rate = rate;
            summary.predicted_rate = Some(predicted);
            let n = relax.snapshots.len().min(limit.snapshots.len());
            let cut = |t: &Trajectory| Trajectory {
                snapshots: t.snapshots[..n].to_vec(),
                ..Default::default()
            };
            summary.sup_pose_error =
                Some(compare_trajectories(&cut(&relax), &cut(&limit), &curves)?.sup_pose_error);
            (relax, Some(limit))
        }
    };
    summary.steps = trajectory.snapshots.len().saturating_sub(1);
    summary.final_time = trajectory.last().map_or(0.0, |s| s.time);
    summary.halted_at_collision = trajectory.halted_at_collision();
    summary.collision_time = trajectory.collision.map(|c| c.time);
    summary.collision_distance = trajectory.collision.map(|c| c.d_min);
    summary.richardson_error = trajectory.error_estimate;
    Ok(RunOutput {
        trajectory,
        limit,
        summary,
        curves,
    })
}

/// Grid of `n³` points covering all placed curves with a margin.
pub fn auto_grid(state: &SystemState, curves: &[Curve], n: usize) -> Result<GridSpec> {
    if n < 2 {
        return Err(Error::Config("grid resolution must be ≥ 2".into()));
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for (b, c) in state.bodies.iter().zip(curves) {
        for x in &place_unchecked(c, &b.pose).nodes {
            lo = lo.inf(x);
            hi = hi.sup(x);
        }
    }
    let center = (lo + hi) * 0.5;
    let half = 0.5 * (hi - lo).max() + 1.0;
    Ok(GridSpec::cube(center, half, n))
}

/// Perturbation field of the limit solution at the poses of `state`.
pub fn limit_field(
    cfg: &SimConfig,
    state: &SystemState,
    curves: &[Curve],
    grid: &GridSpec,
) -> Result<(FieldGrid, f64)> {
    let mut s = state.clone();
    for (b, tw) in s
        .bodies
        .iter_mut()
        .zip(limit_rhs(state, &cfg.flow, curves)?)
    {
        b.twist = tw;
    }
    let field = perturbation_field(&s, &cfg.flow, curves, grid, None)?;
    let div = if grid.dims.iter().all(|d| *d >= 3) {
        divergence_check(&field)?
    } else {
        0.0
    };
    Ok((field, div))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<String>) -> Result<()> {
    fs::write(dir.join(name), bytes)?;
    files.push(name.to_string());
    Ok(())
}

fn write_field(field: &FieldGrid, dir: &Path, files: &mut Vec<String>, plots: bool) -> Result<()> {
    let mut vtk = Vec::new();
    field.write_vtk(&mut vtk)?;
    write_file(dir, "field.vtk", &vtk, files)?;
    let mut csv = Vec::new();
    field.write_csv(&mut csv)?;
    write_file(dir, "field.csv", &csv, files)?;
    if plots {
        let svg = field_slice(field, field.dims[2] / 2, "perturbation speed, middle slice")?;
        write_file(dir, "field_slice.svg", svg.as_bytes(), files)?;
    }
    Ok(())
}

fn trajectory_plot(traj: &Trajectory) -> String {
    let n = traj.snapshots.first().map_or(0, |s| s.bodies.len());
    let mut plot = LinePlot::new("center trajectories (x–y projection)", "h₁", "h₂");
    for i in 0..n {
        let pts = traj
            .snapshots
            .iter()
            .map(|s| {
                (
                    s.bodies[i].pose.translation.x,
                    s.bodies[i].pose.translation.y,
                )
            })
            .collect();
        plot = plot.with(Series::new(format!("body {i}"), pts));
    }
    plot.render()
}

fn energy_plot(traj: &Trajectory) -> String {
    let e = traj
        .snapshots
        .iter()
        .filter_map(|s| s.energy.map(|d| (s.time, d.e)))
        .collect();
    let z = traj
        .snapshots
        .iter()
        .filter_map(|s| s.energy.map(|d| (s.time, d.z)))
        .collect();
    LinePlot::new("modulated energy", "t", "E, Z")
        .log_y()
        .with(Series::new("E", e))
        .with(Series::new("Z", z))
        .render()
}

/// Resistance matrices, Faxén loads and inertia at the initial poses.
pub fn matrices_report(cfg: &SimConfig, curves: &[Curve]) -> Result<serde_json::Value> {
    let state = cfg.initial_state(curves)?;
    let mut bodies = Vec::new();
    for (i, (b, c)) in state.bodies.iter().zip(curves).enumerate() {
        let placed = place_unchecked(c, &b.pose);
        let k = resistance_matrix(&placed, &b.pose.translation)?;
        let f = faxen_load(&placed, &b.pose.translation, &cfg.flow, 0.0);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|r| (0..6).map(|s| k.0[(r, s)]).collect())
            .collect();
        let mut entry = json!({
            "body": i,
            "resistance": rows,
            "faxen_load": f.to_vector().as_slice(),
            "condition_number": k.condition_number(),
        });
        if cfg.model == ModelKind::Relaxation {
            let model = cfg.relaxation_model(curves)?;
            let m = model.bodies[i].inertia.world_matrix(&b.pose.rotation);
            let mrows: Vec<Vec<f64>> = (0..6)
                .map(|r| (0..6).map(|s| m[(r, s)]).collect())
                .collect();
            entry["inertia"] = json!(mrows);
        }
        bodies.push(entry);
    }
    Ok(json!({ "bodies": bodies }))
}

/// Runs `cfg` and writes the trajectory, plots, optional field files and
/// `manifest.json` into `out`.
pub fn run(cfg: &SimConfig, out: &Path, dump_matrices: bool) -> Result<RunSummary> {
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let output = simulate(cfg)?;
    let mut summary = output.summary;
    let traj = &output.trajectory;
    let mut files = Vec::new();
    if cfg.outputs.trajectory {
        let mut csv = Vec::new();
        traj.write_csv(&mut csv)?;
        write_file(out, "trajectory.csv", &csv, &mut files)?;
    }
    if cfg.outputs.plots {
        write_file(
            out,
            "trajectory.svg",
            trajectory_plot(traj).as_bytes(),
            &mut files,
        )?;
        if cfg.model == ModelKind::Relaxation {
            write_file(out, "energy.svg", energy_plot(traj).as_bytes(), &mut files)?;
        }
    }
    if cfg.outputs.field {
        let grid = cfg
            .grid
            .ok_or_else(|| Error::Config("outputs.field requires a grid".into()))?;
        let last = traj
            .last()
            .ok_or_else(|| Error::DegenerateInput("empty trajectory".into()))?;
        let state = SystemState {
            bodies: last.bodies.clone(),
            time: last.time,
            d_min: last.d_min,
        };
        let (field, div) = limit_field(cfg, &state, &output.curves, &grid)?;
        summary.field_divergence = Some(div);
        write_field(&field, out, &mut files, cfg.outputs.plots)?;
    }
    if dump_matrices {
        let m = matrices_report(cfg, &output.curves)?;
        write_file(
            out,
            "matrices.json",
            serde_json::to_string_pretty(&m)?.as_bytes(),
            &mut files,
        )?;
    }
    files.push("manifest.json".into());
    summary.files = files;
    let manifest = json!({
        "filstokes_version": env!("CARGO_PKG_VERSION"),
        "command": "simulate",
        "config": cfg,
        "summary": summary,
        "halted_at_collision": summary.halted_at_collision,
        "threads": thread_limit(),
        "wall_time_seconds": start.elapsed().as_secs_f64(),
    });
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldReport {
    pub grid: GridSpec,
    pub max_scaled_divergence: f64,
    pub masked_points: usize,
    pub files: Vec<String>,
}

/// Perturbation field of the initial configuration; `resolution` overrides
/// the configured grid with an automatic `n³` cube.
pub fn run_field(cfg: &SimConfig, out: &Path, resolution: Option<usize>) -> Result<FieldReport> {
    let start = Instant::now();
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let curves = cfg.curves()?;
    let state = cfg.initial_state(&curves)?;
    let grid = match (resolution, cfg.grid) {
        (Some(n), _) => auto_grid(&state, &curves, n)?,
        (None, Some(g)) => g,
        (None, None) => auto_grid(&state, &curves, 32)?,
    };
    let (field, div) = limit_field(cfg, &state, &curves, &grid)?;
    let mut files = Vec::new();
    write_field(&field, out, &mut files, true)?;
    files.push("field_report.json".into());
    let report = FieldReport {
        grid,
        max_scaled_divergence: div,
        masked_points: field.mask.iter().filter(|m| **m).count(),
        files,
    };
    let manifest = json!({
        "filstokes_version": env!("CARGO_PKG_VERSION"),
        "command": "field",
        "config": cfg,
        "report": report,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
    });
    fs::write(
        out.join("field_report.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(report)
}

/// Swept parameter of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Eps,
    Dt,
    N,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eps" => Ok(Self::Eps),
            "dt" => Ok(Self::Dt),
            "n" => Ok(Self::N),
            _ => Err(Error::Config(format!(
                "unknown sweep parameter {s:?} (eps, dt, n)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    /// eps: sup pose error; dt: difference to the next finer run;
    /// n: relative resistance error.
    pub error: f64,
    /// dt: observed order between this and the next row.
    pub order: Option<f64>,
    /// eps: fitted initial-layer decay rate.
    pub decay_rate: Option<f64>,
    /// eps: `λ_min(M⁻¹K) / ε²`.
    pub predicted_rate: Option<f64>,
    /// n: error against the circle closed form (circle presets only).
    pub closed_form_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    /// eps sweeps: pose error strictly decreasing with `ε`.
    pub monotone: Option<bool>,
    pub files: Vec<String>,
}

fn circle_closed_form(preset: &Preset) -> Option<crate::Mat6> {
    if let Preset::Circle { radius } = preset {
        let p2 = std::f64::consts::PI * std::f64::consts::PI;
        let r = *radius;
        let d = crate::Vec6::new(
            6.0 * p2 * r,
            6.0 * p2 * r,
            8.0 * p2 * r,
            4.0 * p2 * r.powi(3),
            4.0 * p2 * r.powi(3),
            4.0 * p2 * r.powi(3),
        );
        return Some(crate::Mat6::from_diagonal(&d));
    }
    None
}

/// Convergence study over `ε`, `dt` or the node count.
pub fn sweep(template: &SimConfig, param: SweepParam, values: &[f64]) -> Result<SweepReport> {
    if values.len() < 2 {
        return Err(Error::Config("a sweep needs at least 2 values".into()));
    }
    template.validate()?;
    let rows = match param {
        SweepParam::Eps => {
            let runs = par::map(values, |_, &eps| -> Result<SweepRow> {
                let mut cfg = template.clone();
                cfg.model = ModelKind::Relaxation;
                cfg.eps = Some(eps);
                cfg.richardson = false;
                let out = simulate(&cfg)?;
                Ok(SweepRow {
                    value: eps,
                    error: out.summary.sup_pose_error.unwrap_or(f64::NAN),
                    order: None,
                    decay_rate: out.summary.decay_rate,
                    predicted_rate: out.summary.predicted_rate,
                    closed_form_error: None,
                })
            });
            runs.into_iter().collect::<Result<Vec<_>>>()?
        }
        SweepParam::Dt => {
            let mut sorted = values.to_vec();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let finals = par::map(
                &sorted,
                |_, &dt| -> Result<Vec<crate::dynamics::BodyState>> {
                    let mut cfg = template.clone();
                    cfg.model = ModelKind::Limit;
                    cfg.dt = Some(dt);
                    cfg.richardson = false;
                    let out = simulate(&cfg)?;
                    if out.trajectory.halted_at_collision() {
                        return Err(Error::Precondition("collision during dt sweep".into()));
                    }
                    Ok(out
                        .trajectory
                        .last()
                        .map(|s| s.bodies.clone())
                        .unwrap_or_default())
                },
            )
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let diffs: Vec<f64> = finals
                .windows(2)
                .map(|w| {
                    crate::dynamics::pose_error(
                        &template.curves().unwrap_or_default(),
                        &w[0],
                        &w[1],
                    )
                })
                .collect();
            sorted
                .iter()
                .enumerate()
                .map(|(i, &dt)| SweepRow {
                    value: dt,
                    error: diffs.get(i).copied().unwrap_or(f64::NAN),
                    order: (i + 1 < diffs.len())
                        .then(|| (diffs[i] / diffs[i + 1]).ln() / (sorted[i] / sorted[i + 1]).ln()),
                    decay_rate: None,
                    predicted_rate: None,
                    closed_form_error: None,
                })
                .collect()
        }
        SweepParam::N => {
            let ns: Vec<usize> = values.iter().map(|v| v.round() as usize).collect();
            let body = &template.bodies[0];
            let pose = body.pose.to_pose()?;
            let mats = par::map(&ns, |_, &n| -> Result<crate::Mat6> {
                let mut cfg = template.clone();
                cfg.bodies.truncate(1);
                cfg.bodies[0].nodes = n;
                let c = cfg.curves()?;
                Ok(resistance_matrix(&c[0], &Vec3::zeros())?.0)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let finest = ns
                .iter()
                .enumerate()
                .max_by_key(|(_, n)| **n)
                .map(|(i, _)| i)
                .unwrap_or(0);
            let closed = match &body.curve {
                CurveSource::Preset(p) => circle_closed_form(p),
                _ => None,
            };
            let _ = pose;
            ns.iter()
                .zip(&mats)
                .map(|(n, m)| SweepRow {
                    value: *n as f64,
                    error: (m - mats[finest]).amax() / mats[finest].amax(),
                    order: None,
                    decay_rate: None,
                    predicted_rate: None,
                    closed_form_error: closed.map(|k| (m - k).amax() / k.amax()),
                })
                .collect()
        }
    };
    let monotone = (param == SweepParam::Eps).then(|| {
        let mut r = rows.clone();
        r.sort_by(|a, b| b.value.total_cmp(&a.value));
        r.windows(2).all(|w| w[1].error < w[0].error)
    });
    Ok(SweepReport {
        param,
        rows,
        monotone,
        files: Vec::new(),
    })
}

/// Runs [`sweep`] and writes `sweep.csv`, `sweep.svg` and `sweep.json`.
pub fn run_sweep(
    template: &SimConfig,
    param: SweepParam,
    values: &[f64],
    out: &Path,
) -> Result<SweepReport> {
    fs::create_dir_all(out)?;
    let mut report = sweep(template, param, values)?;
    let mut files = Vec::new();
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.12e}"));
    let mut csv = String::from("value,error,order,decay_rate,predicted_rate,closed_form_error\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{:.12e},{:.12e},{},{},{},{}\n",
            r.value,
            r.error,
            opt(r.order),
            opt(r.decay_rate),
            opt(r.predicted_rate),
            opt(r.closed_form_error)
        ));
    }
    write_file(out, "sweep.csv", csv.as_bytes(), &mut files)?;
    let name = match param {
        SweepParam::Eps => "ε",
        SweepParam::Dt => "dt",
        SweepParam::N => "n",
    };
    let mut plot = LinePlot::new(format!("{name} sweep"), name, "error")
        .log_log()
        .with(Series::new(
            "error",
            report.rows.iter().map(|r| (r.value, r.error)).collect(),
        ));
    if param == SweepParam::Eps {
        plot = plot.with(Series::new(
            "decay rate",
            report
                .rows
                .iter()
                .filter_map(|r| r.decay_rate.map(|d| (r.value, d)))
                .collect(),
        ));
    }
    write_file(out, "sweep.svg", plot.render().as_bytes(), &mut files)?;
    files.push("sweep.json".into());
    report.files = files;
    let manifest = json!({
        "filstokes_version": env!("CARGO_PKG_VERSION"),
        "command": "sweep",
        "config": template,
        "param": param,
        "values": values,
        "report": report,
    });
    fs::write(
        out.join("sweep.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring_config() -> SimConfig {
        SimConfig::from_json(
            r#"{
                "bodies": [{"curve": {"preset": "circle"}, "nodes": 64,
                            "pose": {"translation": [1, 2, 3], "axis": [1, 0, 0], "angle": 0.3}}],
                "flow": {"kind": "constant", "velocity": [0.5, 0, -1]},
                "T": 1.0, "dt": 0.1
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn constant_flow_run() {
        let out = simulate(&ring_config()).unwrap();
        let h = out.trajectory.last().unwrap().bodies[0].pose.translation;
        assert!((h - Vec3::new(1.5, 2.0, 2.0)).norm() < 1e-12);
        assert_eq!(out.summary.steps, 10);
    }

    #[test]
    fn config_errors_are_reported() {
        let e = SimConfig::from_json("{\n \"bodies\": [],\n \"T\": 1, \"bogus\": 2}").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let mut cfg = ring_config();
        cfg.model = ModelKind::Relaxation;
        assert!(cfg.validate().is_err());
        cfg.eps = Some(0.1);
        cfg.validate().unwrap();
        cfg.bodies[0].pose.quaternion = Some([1.0, 0.0, 0.0, 0.0]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn quaternion_pose() {
        let p = PoseSpec {
            quaternion: Some([0.5f64.sqrt(), 0.0, 0.0, 0.5f64.sqrt()]),
            ..Default::default()
        }
        .to_pose()
        .unwrap();
        assert!((p.rotation * Vec3::x() - Vec3::y()).norm() < 1e-12);
        let bad = PoseSpec {
            quaternion: Some([2.0, 0.0, 0.0, 0.0]),
            ..Default::default()
        };
        assert!(bad.to_pose().is_err());
    }

    #[test]
    fn manifest_config_roundtrip() {
        let cfg = ring_config();
        let manifest = json!({"filstokes_version": "0", "config": cfg});
        let back = SimConfig::from_json(&manifest.to_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn n_sweep_converges_to_closed_form() {
        let mut cfg = ring_config();
        cfg.flow = Flow::Still;
        let rep = sweep(&cfg, SweepParam::N, &[64.0, 128.0, 256.0]).unwrap();
        assert!(rep.rows.iter().all(|r| r.closed_form_error.unwrap() < 1e-8));
        assert!(sweep(&cfg, SweepParam::N, &[64.0]).is_err());
    }
}
