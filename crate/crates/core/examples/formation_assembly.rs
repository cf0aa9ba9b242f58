//! Five robots assemble a regular pentagon from scattered starts.
//!
//! ```bash
//! cargo run --example formation_assembly
//! ```

use behavior_select::behavior::{control, energy, BehaviorParams};
use behavior_select::{default_library, euler_step, Arena, BehaviorId, EnsembleState, Vec2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> behavior_select::Result<()> {
    let library = default_library(5)?;
    let spec = library.by_id(BehaviorId::StaticFormation).expect("in the default library");
    let p = BehaviorParams::new(0.4, Vec2::ZERO);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x = EnsembleState::random(5, &Arena::default(), &mut rng)?;

    println!("{:>6}  {:>12}", "t [s]", "energy");
    for step in 0..=1500 {
        if step % 100 == 0 {
            println!("{:>6.1}  {:>12.6}", x.time(), energy(spec, &x, &p));
        }
        let u = control(spec, &x, &p)?;
        x = euler_step(&x, &u, 0.01)?;
    }

    // Every edge should now sit at theta times its pentagon separation.
    let seps = spec.separations().expect("formations carry separations");
    println!("\nedge   length   target");
    for (k, &(i, j)) in spec.graph().edges().iter().enumerate() {
        let d = x.positions()[i].distance(x.positions()[j]);
        println!("{i}-{j}    {d:.4}   {:.4}", p.theta * seps[k]);
    }
    Ok(())
}
