//! Train a behavior-selection policy for convoy protection and compare it
//! with random switching and the ad-hoc escort.
//!
//! ```bash
//! cargo run --release --example convoy_protection
//! ```

use behavior_select::experiment::{compare_modes, evaluate, ExperimentConfig, Summary};
use behavior_select::learning::select_greedy;
use behavior_select::runner::train;
use behavior_select::MissionKind;

fn main() -> behavior_select::Result<()> {
    let cfg = ExperimentConfig::for_mission(MissionKind::Convoy);
    let setup = cfg.setup()?;
    let seed = cfg.run.seed;

    let mut rewards = Vec::new();
    let q = train(&setup, seed, |_, log| rewards.push(log.total_reward))?;
    println!("training reward, mean per 20 episodes:");
    for (k, chunk) in rewards.chunks(20).enumerate() {
        println!("  {:>3}-{:<3} {:>9.3}", k * 20, k * 20 + chunk.len() - 1, Summary::of(chunk).mean);
    }

    println!("\ngreedy behavior per distance bin:");
    for s in 0..q.states() {
        let m = select_greedy(&q, s)?;
        println!("  bin {s}: {}", setup.library.get(m)?.id());
    }

    println!("\nevaluation over {} paired episodes:", cfg.run.eval_episodes);
    for &mode in compare_modes(MissionKind::Convoy) {
        let logs = evaluate(&setup, Some(&q), mode, seed)?;
        let totals: Vec<f64> = logs.iter().map(|l| l.total_reward).collect();
        let s = Summary::of(&totals);
        println!("  {:<8} mean {:>8.3}  std {:>7.3}", mode.name(), s.mean, s.std);
    }
    Ok(())
}
