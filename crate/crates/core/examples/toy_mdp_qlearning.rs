//! Tabular Q-learning on a three-state chain, checked against value
//! iteration.
//!
//! ```bash
//! cargo run --example toy_mdp_qlearning
//! ```

use behavior_select::learning::DeterministicMdp;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_iteration(mdp: &DeterministicMdp) -> Vec<Vec<f64>> {
    let mut q = vec![vec![0.0; mdp.actions()]; mdp.states()];
    for _ in 0..1000 {
        let prev = q.clone();
        for (s, row) in q.iter_mut().enumerate() {
            for (a, v) in row.iter_mut().enumerate() {
                let best = prev[mdp.next[s][a]].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                *v = mdp.reward[s][a] + mdp.gamma * best;
            }
        }
    }
    q
}

fn main() -> behavior_select::Result<()> {
    let mdp = DeterministicMdp::three_state_chain();
    let exact = value_iteration(&mdp);
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    for updates in [100, 1_000, 10_000, 100_000] {
        let q = mdp.q_learning(0.1, updates, &mut rng)?;
        let mut err: f64 = 0.0;
        for (s, row) in exact.iter().enumerate() {
            for (a, v) in row.iter().enumerate() {
                err = err.max((q.get(s, a)? - v).abs());
            }
        }
        println!("{updates:>7} updates: max error {err:.3e}");
    }

    println!("\nexact Q:");
    for (s, row) in exact.iter().enumerate() {
        println!("  s{s}: stay {:.4}  advance {:.4}", row[0], row[1]);
    }
    Ok(())
}
