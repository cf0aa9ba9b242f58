//! The ad-hoc convoy escort: cyclic pursuit centered on a target, with the
//! ring radius set to the desired stand-off distance.
//!
//! ```bash
//! cargo run --example cyclic_pursuit_ring
//! ```

use behavior_select::behavior::{radius_to_theta, theta_to_radius};
use behavior_select::experiment::ExperimentConfig;
use behavior_select::runner::{run_adhoc_convoy, RunConfig};
use behavior_select::{ConvoyEnv, Vec2};

fn main() -> behavior_select::Result<()> {
    let delta = 0.5;
    let cfg = ExperimentConfig {
        convoy: ConvoyEnv {
            z: Vec2::new(0.2, -0.1),
            v_z: Vec2::ZERO,
            sigma: 0.0,
            delta,
            ..ConvoyEnv::default()
        },
        run: RunConfig {
            t_f: 20.0,
            trajectory_every: 200,
            ..RunConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let setup = cfg.setup()?;
    let theta = radius_to_theta(delta, setup.robot_count())?;
    println!(
        "theta = {theta:.4} gives radius {:.4}",
        theta_to_radius(theta, setup.robot_count())?
    );

    let log = run_adhoc_convoy(&setup, 0, 3)?;
    println!("\n{:>6}  {:>8}  {:>8}", "t [s]", "min r", "max r");
    for s in &log.trajectory {
        let radii: Vec<f64> = s.positions().iter().map(|p| p.distance(cfg.convoy.z)).collect();
        let lo = radii.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = radii.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("{:>6.1}  {lo:>8.4}  {hi:>8.4}", s.time());
    }
    println!("\n{} switches, total reward {:.4}", log.events.len(), log.total_reward);
    Ok(())
}
