//! Catalyst and reactant particle systems, recorded both as Galton–Watson
//! forests and as birth–death forests.

use catgen::particle::{simulate_joint, Representation, SimConfig};

fn main() -> catgen::Result<()> {
    for representation in [Representation::GaltonWatson, Representation::BirthDeath] {
        let cfg = SimConfig { n: 20, t_max: 3.0, seed: 1, representation, ..Default::default() };
        let run = simulate_joint(&cfg)?;
        let (cat, cat_forest) = &run.catalyst;
        let (re, re_forest) = &run.reactant;
        println!("{representation:?}");
        println!("  catalyst: extinct at {:.3}, {} forest nodes", cat.stopping_time(0.0), cat_forest.len());
        println!("  reactant: mass {:.2} at t=1, {:.2} at t=3, {} forest nodes", re.value_at(1.0), re.value_at(3.0), re_forest.len());
        // The reactant forest stops where the catalyst dies out.
        let cap = re_forest.height_cap.unwrap_or(cfg.t_max);
        let t = cap / 2.0;
        println!("  reactant forest capped at {cap:.3}; {} individuals alive at {t:.3}", re_forest.level_set(t).len());
    }
    Ok(())
}
