//! Tilted ring in simple shear: limit trajectory versus the relaxation model.

use filstokes::curves::{resample_parametric, Pose, Preset};
use filstokes::dynamics::{
    compare_trajectories, simulate_limit, simulate_relaxation, LimitSettings, RelaxationModel,
    SystemState,
};
use filstokes::flows::Flow;
use filstokes::Vec3;

fn main() -> filstokes::Result<()> {
    let ring = resample_parametric(&Preset::Circle { radius: 1.0 }, 128)?;
    let curves = vec![ring];
    let start = SystemState::new(
        &[Pose::from_axis_angle(Vec3::zeros(), Vec3::x(), 0.5)],
        &curves,
        0.0,
    )?;
    let flow = Flow::Shear { rate: 1.0 };
    let settings = LimitSettings::new(1.0, 0.01);
    let limit = simulate_limit(&start, &flow, &curves, &settings)?;
    println!("final pose {:?}", limit.last().unwrap().bodies[0].pose);
    for eps in [1e-1, 1e-2, 1e-3] {
        let model = RelaxationModel::from_filaments(eps, &curves, &[Default::default()], &[1.0])?;
        let relax = simulate_relaxation(&start, None, &model, &flow, &curves, &settings)?;
        let report = compare_trajectories(&relax, &limit, &curves)?;
        println!(
            "eps {eps:.0e}: sup pose error {:.3e}",
            report.sup_pose_error
        );
    }
    Ok(())
}
