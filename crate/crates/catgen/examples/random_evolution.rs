//! The random-evolution contour on a saved catalyst realization, compared
//! with the contour of the particle reactant forest on the same catalyst.

use catgen::contour::{contour_from_forest, tree_from_excursion};
use catgen::diffusion::simulate_random_evolution;
use catgen::particle::{simulate_reactant_quenched, MassPath, SimConfig};
use catgen::verify::SAVED_CATALYST;

fn main() -> catgen::Result<()> {
    let catalyst = MassPath::from_csv(SAVED_CATALYST)?;
    let cfg = SimConfig { n: 20, delta: 0.2, t_max: catalyst.horizon, seed: 2, ..Default::default() };
    let cut = catalyst.stopping_time(cfg.delta);

    let walk = simulate_random_evolution(&cfg, &catalyst)?;
    let from_walk = tree_from_excursion(&walk);
    println!("random evolution: {} turns, tree height {:.3}, {} leaves", walk.points.len(), from_walk.height(), from_walk.leaf_count());

    let (_, forest) = simulate_reactant_quenched(&cfg, &catalyst)?;
    let forest = forest.truncate(cut);
    let contour = contour_from_forest(&forest, 2.0)?;
    println!("particle contour: {} turns, tree height {:.3}, {} leaves", contour.points.len(), forest.height(), forest.leaf_count());
    println!("both are cut at the catalyst's first passage below {}: {cut:.4}", cfg.delta);
    Ok(())
}
