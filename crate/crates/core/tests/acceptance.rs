//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to
//! stderr (uncaptured) and then asserts.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Cholesky, Matrix6, SymmetricEigen};

use filstokes::curves::{place, resample_parametric, Curve, Pose, Preset, TwistVelocity};
use filstokes::dynamics::{
    simulate_limit, simulate_relaxation, BodyState, LimitSettings, RelaxationModel,
    RelaxationState, SystemState, Trajectory,
};
use filstokes::flowfield::{
    line_velocity, perturbation_field, total_line_force, GridSpec, LineMeasureDensity,
};
use filstokes::flows::{BackgroundFlow, Flow};
use filstokes::kernels::{drag_matrix, s0};
use filstokes::mobility::{conjugate_resistance, faxen_load, resistance_matrix, solve_quasistatic};
use filstokes::random::Sampler;
use filstokes::{Mat3, Mat6, Vec3};

fn report(name: &str, passed: bool, detail: String) {
    let tag = if passed { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{tag} {name}: {detail}");
    assert!(passed, "{name}: {detail}");
}

fn circle(n: usize) -> Curve {
    resample_parametric(&Preset::Circle { radius: 1.0 }, n).unwrap()
}

fn stokeslet(x: &Vec3) -> Mat3 {
    let r = x.norm();
    (Mat3::identity() + x * x.transpose() / (r * r)) / (8.0 * PI * r)
}

fn local_drag(p: &Vec3) -> Mat3 {
    (Mat3::identity() - 0.5 * p * p.transpose()) * (8.0 * PI)
}

fn inf_norm(m: &Mat3) -> f64 {
    (0..3).map(|i| m.row(i).abs().sum()).fold(0.0, f64::max)
}

fn rotation6(q: &Mat3) -> Mat6 {
    let mut r = Mat6::zeros();
    r.fixed_view_mut::<3, 3>(0, 0).copy_from(q);
    r.fixed_view_mut::<3, 3>(3, 3).copy_from(q);
    r
}

fn node_displacement(curve: &Curve, a: &Pose, b: &Pose) -> f64 {
    curve
        .nodes
        .iter()
        .map(|x| ((a.rotation * x + a.translation) - (b.rotation * x + b.translation)).norm())
        .fold(0.0, f64::max)
}

fn sup_pose_error(curve: &Curve, a: &Trajectory, b: &Trajectory) -> f64 {
    assert_eq!(a.snapshots.len(), b.snapshots.len());
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| {
            assert!((x.time - y.time).abs() < 1e-12);
            node_displacement(curve, &x.bodies[0].pose, &y.bodies[0].pose)
        })
        .fold(0.0, f64::max)
}

#[test]
fn kernel_identity() {
    let mut rng = Sampler::new(101);
    let mut worst = 0.0f64;
    let mut oracle = 0.0f64;
    for _ in 0..10_000 {
        let p = rng.unit_vector();
        worst = worst.max(inf_norm(
            &(s0(&p).unwrap() * drag_matrix(&p) - Mat3::identity()),
        ));
        let s0_ref = (Mat3::identity() + p * p.transpose()) / (8.0 * PI);
        oracle = oracle.max(
            (s0(&p).unwrap() - s0_ref)
                .amax()
                .max((drag_matrix(&p) - local_drag(&p)).amax()),
        );
    }
    report(
        "kernel identity",
        worst <= 1e-12 && oracle <= 1e-14,
        format!("max |S0 k - I|_inf = {worst:.2e} (tol 1e-12), closed-form mismatch {oracle:.2e}"),
    );
}

#[test]
fn drag_lower_bound() {
    let mut rng = Sampler::new(102);
    let mut min = f64::INFINITY;
    for _ in 0..10_000 {
        let p = rng.unit_vector();
        let v = rng.unit_vector();
        min = min.min(v.dot(&(drag_matrix(&p) * v)));
    }
    report(
        "drag lower bound",
        min >= 4.0 * PI - 1e-10,
        format!("min k(p)v.v = {min:.15} vs 4pi = {:.15}", 4.0 * PI),
    );
}

#[test]
fn circle_resistance_closed_form() {
    let k = resistance_matrix(&circle(512), &Vec3::zeros()).unwrap().0;
    let p2 = PI * PI;
    let expected = [6.0 * p2, 6.0 * p2, 8.0 * p2];
    let mut rel = 0.0f64;
    for (i, e) in expected.iter().enumerate() {
        rel = rel.max((k[(i, i)] - e).abs() / e);
    }
    rel = rel.max((k[(5, 5)] - 4.0 * p2).abs() / (4.0 * p2));
    let scale = k.amax();
    let mut off = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            off = off.max(k[(i, 3 + j)].abs()).max(k[(3 + i, j)].abs());
            if i != j {
                off = off.max(k[(i, j)].abs()).max(k[(3 + i, 3 + j)].abs());
            }
        }
    }
    off /= scale;
    report(
        "circle resistance closed form",
        rel <= 1e-8 && off <= 1e-8,
        format!(
            "max relative diagonal error {rel:.2e}, off-diagonal/coupling {off:.2e} (tol 1e-8)"
        ),
    );
}

#[test]
fn resistance_coercivity() {
    let mut rng = Sampler::new(104);
    let mut worst = f64::INFINITY;
    let mut min_eig = f64::INFINITY;
    for _ in 0..50 {
        let c = rng.curve(128).unwrap();
        let k = resistance_matrix(&c, &Vec3::zeros()).unwrap().0;
        min_eig = min_eig.min(SymmetricEigen::new(k).eigenvalues.min());
        let knorm = k.norm();
        for _ in 0..100 {
            let v = rng.vector(1.0);
            let w = rng.vector(1.0);
            let y = TwistVelocity::new(v, w).to_vector();
            let quad = y.dot(&(k * y));
            let sq: f64 = c
                .nodes
                .iter()
                .zip(&c.arc_weights)
                .map(|(x, wt)| (v + w.cross(x)).norm_squared() * wt)
                .sum();
            worst = worst.min((quad - 2.0 * PI * sq) / knorm);
        }
    }
    report(
        "SPD and coercivity",
        worst >= -1e-8 && min_eig > 0.0,
        format!("min (YKY - 2pi int|v+w^x|^2)/|K| = {worst:.3e} (tol -1e-8), min eigenvalue {min_eig:.3e}"),
    );
}

#[test]
fn sylvester_conjugation() {
    let mut rng = Sampler::new(105);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let c = rng.curve(128).unwrap();
        let pose = rng.pose(3.0);
        let body = resistance_matrix(&c, &Vec3::zeros()).unwrap();
        let world = resistance_matrix(&place(&c, &pose).unwrap(), &pose.translation)
            .unwrap()
            .0;
        let r = rotation6(&pose.rotation);
        let oracle = r * body.0 * r.transpose();
        let lib = conjugate_resistance(&body, &pose.rotation).unwrap().0;
        let scale = world.amax();
        worst = worst
            .max((world - oracle).amax() / scale)
            .max((lib - oracle).amax() / scale);
    }
    report(
        "Sylvester conjugation",
        worst <= 1e-9,
        format!("max relative mismatch {worst:.2e} (tol 1e-9)"),
    );
}

#[test]
fn passive_tracer() {
    let mut rng = Sampler::new(106);
    let mut twist_err = 0.0f64;
    let mut field_max = 0.0f64;
    let grid = GridSpec::cube(Vec3::zeros(), 2.0, 5);
    for _ in 0..20 {
        let c = rng.curve(128).unwrap();
        let k = resistance_matrix(&c, &Vec3::zeros()).unwrap();
        for j in 0..20 {
            let u = rng.vector(2.0);
            let flow = Flow::Constant { velocity: u.into() };
            let t = solve_quasistatic(&k, &faxen_load(&c, &Vec3::zeros(), &flow, 0.0)).unwrap();
            twist_err = twist_err.max((t.linear - u).amax()).max(t.angular.amax());
            if j == 0 {
                let mut s =
                    SystemState::new(&[Pose::identity()], std::slice::from_ref(&c), 0.0).unwrap();
                s.bodies[0].twist = t;
                let f =
                    perturbation_field(&s, &flow, std::slice::from_ref(&c), &grid, None).unwrap();
                let m = f.velocity.iter().map(|v| v.norm()).fold(0.0, f64::max) / u.norm();
                field_max = field_max.max(m);
            }
        }
    }
    report(
        "passive tracer",
        twist_err <= 1e-10 && field_max <= 1e-10,
        format!(
            "max twist error {twist_err:.2e}, max |u_p|/|U| on grid {field_max:.2e} (tol 1e-10)"
        ),
    );
}

/// `λ_min(M⁻¹K)` via a Cholesky congruence, with `K = K̂ / |log ε|`.
fn generalized_min(m: &Mat6, k: &Mat6) -> f64 {
    let l = Cholesky::new(*m).expect("M is SPD").l();
    let li = l.try_inverse().unwrap();
    let c: Matrix6<f64> = li * k * li.transpose();
    SymmetricEigen::new((c + c.transpose()) * 0.5)
        .eigenvalues
        .min()
}

fn deviation(traj: &Trajectory) -> Vec<f64> {
    traj.snapshots
        .iter()
        .map(|s| {
            let f = s
                .faxen
                .as_ref()
                .expect("relaxation snapshots carry Faxén twists");
            (s.bodies[0].twist.to_vector() - f[0].to_vector()).norm()
        })
        .collect()
}

fn log_slope(times: &[f64], values: &[f64]) -> Option<f64> {
    let v0 = values[0];
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .take_while(|(_, v)| **v >= 1e-6 * v0)
        .filter(|(_, v)| **v <= 0.5 * v0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (st, sv) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mt, mv) = (st / n, sv / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |a, p| {
        (a.0 + (p.0 - mt) * (p.1 - mv), a.1 + (p.0 - mt).powi(2))
    });
    Some(-num / den)
}

#[test]
fn relaxation_layer() {
    let curves = vec![circle(64)];
    let flow = Flow::Shear { rate: 1.0 };
    let pose = Pose::from_axis_angle(Vec3::zeros(), Vec3::new(1.0, 0.3, 0.0), 0.8);
    let s0 = SystemState::new(&[pose], &curves, 0.0).unwrap();
    let twists = [TwistVelocity::new(
        Vec3::new(1.0, -0.5, 0.3),
        Vec3::new(0.2, 0.4, -1.0),
    )];
    let mut lines = Vec::new();
    let mut ok = true;
    for eps in [1e-1, 1e-2] {
        let model = RelaxationModel::from_filaments(eps, &curves, &[Default::default()], &[1.0])
            .unwrap()
            .frozen();
        let r0 = RelaxationState::new(&s0, Some(&twists), &model, &flow, &curves).unwrap();
        assert_eq!(r0.f_a.amax(), 0.0);
        let placed = place(&curves[0], &pose).unwrap();
        let k = resistance_matrix(&placed, &pose.translation).unwrap().0 / eps.ln().abs();
        let m: Mat6 = r0.m.fixed_view::<6, 6>(0, 0).into();
        let predicted = generalized_min(&m, &k) / (eps * eps);
        let dt = 0.1 / predicted;
        let traj = simulate_relaxation(
            &s0,
            Some(&twists),
            &model,
            &flow,
            &curves,
            &LimitSettings::new(200.0 * dt, dt),
        )
        .unwrap();
        let fitted = log_slope(&traj.times(), &deviation(&traj)).unwrap_or(f64::NAN);
        let rel = (fitted / predicted - 1.0).abs();
        ok &= rel <= 0.2;
        lines.push(format!(
            "eps={eps:.0e} rate {fitted:.4e} vs {predicted:.4e} ({:.1}%)",
            100.0 * rel
        ));
    }

    let mut plateau = Vec::new();
    for eps in [1e-1, 1e-2] {
        let model =
            RelaxationModel::from_filaments(eps, &curves, &[Default::default()], &[1.0]).unwrap();
        let compatible = RelaxationState::new(&s0, None, &model, &flow, &curves)
            .unwrap()
            .faxen_twists();
        let traj = simulate_relaxation(
            &s0,
            Some(&compatible),
            &model,
            &flow,
            &curves,
            &LimitSettings::new(1.0, 1e-3),
        )
        .unwrap();
        let dev = deviation(&traj);
        assert!(dev[0] < 1e-14);
        plateau.push(dev.iter().copied().fold(0.0, f64::max));
    }
    ok &= plateau[1] <= 10.0 * plateau[0];
    lines.push(format!(
        "compatible data: max |Y-Yflat| {:.3e} (eps=1e-1), {:.3e} (eps=1e-2)",
        plateau[0], plateau[1]
    ));
    report("relaxation layer", ok, lines.join("; "));
}

#[test]
fn limit_convergence() {
    let curves = vec![circle(64)];
    let flow = Flow::Shear { rate: 1.0 };
    let pose = Pose::from_axis_angle(Vec3::zeros(), Vec3::new(1.0, 0.3, 0.0), 0.8);
    let s0 = SystemState::new(&[pose], &curves, 0.0).unwrap();
    let settings = LimitSettings::new(1.0, 1e-3);
    let limit = simulate_limit(&s0, &flow, &curves, &settings).unwrap();
    let errors: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&eps| {
            let model =
                RelaxationModel::from_filaments(eps, &curves, &[Default::default()], &[1.0])
                    .unwrap();
            let relax = simulate_relaxation(&s0, None, &model, &flow, &curves, &settings).unwrap();
            sup_pose_error(&curves[0], &relax, &limit)
        })
        .collect();
    let ok = errors.windows(2).all(|w| w[1] < w[0]);
    report(
        "limit convergence",
        ok,
        format!(
            "sup pose error {:.3e}, {:.3e}, {:.3e} for eps 1e-1, 1e-2, 1e-3",
            errors[0], errors[1], errors[2]
        ),
    );
}

#[test]
fn force_free_line_measure() {
    let curve = Sampler::new(109).curve(128).unwrap();
    let curves = vec![curve];
    let flow = Flow::Sum {
        flows: vec![
            Flow::Shear { rate: 1.0 },
            Flow::Vortex {
                omega: [0.3, 0.0, 0.5],
            },
        ],
    };
    let pose = Pose::from_axis_angle(Vec3::new(0.5, 0.0, 0.2), Vec3::new(0.0, 1.0, 1.0), 0.4);
    let s0 = SystemState::new(&[pose], &curves, 0.0).unwrap();
    let traj = simulate_limit(&s0, &flow, &curves, &LimitSettings::new(2.0, 0.05)).unwrap();
    let mut worst = 0.0f64;
    for snap in &traj.snapshots {
        let BodyState { pose, twist } = snap.bodies[0];
        let placed = place(&curves[0], &pose).unwrap();
        let load = faxen_load(&placed, &pose.translation, &flow, snap.time).norm();
        let oracle: Vec3 = placed
            .nodes
            .iter()
            .zip(&placed.tangents)
            .zip(&placed.arc_weights)
            .map(|((x, t), w)| {
                let rel = twist.velocity_at(&pose.translation, x) - flow.velocity(snap.time, x);
                0.5 * local_drag(t) * rel * *w
            })
            .sum();
        let d =
            LineMeasureDensity::from_twist(&placed, &pose.translation, &twist, &flow, snap.time)
                .unwrap();
        worst = worst
            .max(oracle.norm() / load)
            .max(total_line_force(&d).norm() / load);
    }
    report(
        "force-free fluid measure",
        worst <= 1e-10,
        format!(
            "max |total force| / |f_flat| = {worst:.2e} over {} steps (tol 1e-10)",
            traj.snapshots.len()
        ),
    );
}

fn scaled_divergence(n: usize) -> f64 {
    let curves = vec![circle(256)];
    let mut s = SystemState::new(&[Pose::identity()], &curves, 0.0).unwrap();
    s.bodies[0].twist = TwistVelocity::new(Vec3::z(), Vec3::zeros());
    let h = 2.0 / (n - 1) as f64;
    let spec = GridSpec::cube(Vec3::new(0.0, 0.0, 1.5), 1.0 + h, n + 2);
    let f = perturbation_field(&s, &Flow::Still, &curves, &spec, Some(0.3)).unwrap();
    let [nx, ny, nz] = spec.dims;
    let at = |i: usize, j: usize, k: usize| spec.index(i, j, k);
    let (mut div, mut scale) = (0.0f64, 0.0f64);
    for k in 1..nz - 1 {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let nb = [
                    (at(i + 1, j, k), at(i - 1, j, k)),
                    (at(i, j + 1, k), at(i, j - 1, k)),
                    (at(i, j, k + 1), at(i, j, k - 1)),
                ];
                if f.mask[at(i, j, k)] || nb.iter().any(|(a, b)| f.mask[*a] || f.mask[*b]) {
                    continue;
                }
                let mut g = Mat3::zeros();
                for (d, (a, b)) in nb.iter().enumerate() {
                    g.set_column(
                        d,
                        &((f.velocity[*a] - f.velocity[*b]) / (2.0 * spec.spacing)),
                    );
                }
                div = div.max(g.trace().abs());
                scale = scale.max(g.norm());
            }
        }
    }
    div / scale
}

#[test]
fn field_diagnostics() {
    let d: Vec<f64> = [17, 33, 65].iter().map(|&n| scaled_divergence(n)).collect();
    let ratios = [d[0] / d[1], d[1] / d[2]];
    let div_ok = ratios.iter().all(|r| (3.0..=5.0).contains(r));

    let c = circle(256);
    let v = vec![Vec3::z(); c.len()];
    let force = Vec3::z() * 8.0 * PI * PI;
    let dirs = [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 0.6, 0.8),
        Vec3::new(1.0, 1.0, 1.0).normalize(),
    ];
    let mut mono = 0.0f64;
    let mut envelope = (f64::INFINITY, 0.0f64);
    for dir in dirs {
        for r in [10.0, 30.0, 100.0, 300.0] {
            let x = dir * r;
            let u = line_velocity(&c, &v, &x).unwrap();
            let s = u.norm() * r;
            envelope = (envelope.0.min(s), envelope.1.max(s));
            if r == 100.0 {
                let m = stokeslet(&x) * force;
                mono = mono.max((u - m).norm() / m.norm());
            }
        }
    }
    let far_ok = mono <= 0.05 && envelope.1 <= 2.0 * envelope.0;

    let eps_list = [1e-2, 1e-3, 1e-4, 1e-5];
    let errors: Vec<f64> = eps_list
        .iter()
        .map(|&eps| {
            (0..8)
                .map(|m| {
                    let a = 2.0 * PI * m as f64 / 8.0;
                    let x = Vec3::new(a.cos(), a.sin(), 0.0) * (1.0 - eps);
                    (line_velocity(&c, &v, &x).unwrap() / eps.ln().abs() - Vec3::z()).norm()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let g: Vec<f64> = eps_list.iter().map(|e| 1.0 / e.ln().abs()).collect();
    let b = g.iter().zip(&errors).map(|(x, y)| x * y).sum::<f64>()
        / g.iter().map(|x| x * x).sum::<f64>();
    let dev = g
        .iter()
        .zip(&errors)
        .map(|(x, y)| (y - b * x).abs() / (b * x))
        .fold(0.0, f64::max);
    let log_ok = b > 0.0 && dev <= 0.3;

    report(
        "field diagnostics",
        div_ok && far_ok && log_ok,
        format!(
            "divergence ratios {:.2}, {:.2} (want 4, accept 3..5); monopole mismatch {:.2e} at |x|=100, \
             |u||x| in [{:.4}, {:.4}]; log-law fit b={b:.3}, max deviation {:.1}%",
            ratios[0],
            ratios[1],
            mono,
            envelope.0,
            envelope.1,
            100.0 * dev
        ),
    );
}

fn final_pose(curves: &[Curve], s0: &SystemState, flow: &Flow, dt: f64) -> Pose {
    let traj = simulate_limit(s0, flow, curves, &LimitSettings::new(1.0, dt)).unwrap();
    assert!(!traj.halted_at_collision());
    traj.last().unwrap().bodies[0].pose
}

#[test]
fn integrator_order() {
    let curves = vec![resample_parametric(&Preset::Circle { radius: 0.1 }, 64).unwrap()];
    let flow = Flow::Vortex {
        omega: [0.0, 0.0, 1.0],
    };
    let s0 = SystemState::new(
        &[Pose::from_translation(Vec3::new(1.0, 0.0, 0.0))],
        &curves,
        0.0,
    )
    .unwrap();
    let p: Vec<Pose> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| final_pose(&curves, &s0, &flow, dt))
        .collect();
    let diff = |a: &Pose, b: &Pose| {
        (a.translation - b.translation).norm() + (a.rotation - b.rotation).norm()
    };
    let ratio = diff(&p[0], &p[1]) / diff(&p[1], &p[2]);
    let exact = Vec3::new(1f64.cos(), 1f64.sin(), 0.0);
    report(
        "integrator order",
        (ratio - 16.0).abs() <= 2.0,
        format!(
            "Richardson ratio {ratio:.3} (want 16 +- 2); final center error at dt=0.025 {:.2e}",
            (p[2].translation - exact).norm()
        ),
    );
}
