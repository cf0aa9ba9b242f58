//! Finite-difference check of every gradient the library uses: controls
//! against energies, and tuning-cost gradients against the costs.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use behavior_select::behavior::{control, energy};
use behavior_select::learning::fd_gradient;
use behavior_select::{default_library, Arena, BoxEnv, ConvoyEnv, EnsembleState, Mission};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

fn main() -> behavior_select::Result<()> {
    let library = default_library(5)?;
    let arena = Arena::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let h = 1e-5;

    println!("controls vs -dE/dx");
    for spec in library.specs().iter().filter(|s| s.id().is_gradient_flow()) {
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let x = EnsembleState::random(5, &arena, &mut rng)?;
            let p = spec.space().sample(&mut rng);
            let u = control(spec, &x, &p)?;
            for i in 0..5 {
                let mut plus = x.positions().to_vec();
                let mut minus = plus.clone();
                plus[i].x += h;
                minus[i].x -= h;
                let fd = -(energy(spec, &EnsembleState::new(plus)?, &p)
                    - energy(spec, &EnsembleState::new(minus)?, &p))
                    / (2.0 * h);
                worst = worst.max(rel(u[i].x, fd));
            }
        }
        println!("  {:<24} max rel err {worst:.2e}", spec.id().name());
    }

    println!("\ntuning cost gradients");
    let missions = [
        Mission::Convoy(ConvoyEnv::default()),
        Mission::Box(BoxEnv::default()),
    ];
    for mission in &missions {
        let mut worst: f64 = 0.0;
        for spec in library.specs() {
            for _ in 0..20 {
                let x = EnsembleState::random(5, &arena, &mut rng)?;
                let p = spec.space().sample(&mut rng);
                let g = mission.tuning_cost(spec, &x, &p).grad;
                let fd = fd_gradient(|q| mission.tuning_cost(spec, &x, q).value, p, h)?;
                worst = worst
                    .max(rel(g.theta, fd.theta))
                    .max(rel(g.phi.x, fd.phi.x))
                    .max(rel(g.phi.y, fd.phi.y));
            }
        }
        println!("  {:<24} max rel err {worst:.2e}", mission.kind());
    }
    Ok(())
}
