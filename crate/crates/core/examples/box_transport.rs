//! Train for the box-transport mission, then replay one greedy episode and
//! watch the box approach the goal.
//!
//! ```bash
//! cargo run --release --example box_transport
//! ```

use behavior_select::experiment::{evaluate, EvalMode, ExperimentConfig, Summary};
use behavior_select::runner::{run_episode_eval, train};
use behavior_select::MissionKind;

fn main() -> behavior_select::Result<()> {
    let cfg = ExperimentConfig::for_mission(MissionKind::Box);
    let setup = cfg.setup()?;
    let seed = cfg.run.seed;
    let q = train(&setup, seed, |_, _| {})?;

    let log = run_episode_eval(&setup, &q, 0, seed)?;
    println!("{:>7}  {:<24} {:>8}  {:<16}", "t [s]", "behavior", "reward", "ended by");
    for e in &log.events {
        println!(
            "{:>7.2}  {:<24} {:>8.3}  {:?}",
            e.tau_end,
            e.behavior.name(),
            e.reward,
            e.interrupted_by
        );
    }
    // reward = -(kappa + distance), so the distance is easy to recover
    if let Some(last) = log.events.last() {
        println!("final box-goal distance {:.3} m", -last.reward - cfg.box_env.kappa);
    }

    for mode in [EvalMode::Trained, EvalMode::Random] {
        let totals: Vec<f64> = evaluate(&setup, Some(&q), mode, seed)?
            .iter()
            .map(|l| l.total_reward)
            .collect();
        let s = Summary::of(&totals);
        println!("{:<8} mean {:>8.3}  std {:>7.3}", mode.name(), s.mean, s.std);
    }
    Ok(())
}
