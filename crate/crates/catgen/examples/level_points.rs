//! The level-t genealogical point process of a reactant forest, and the full
//! distance matrix rebuilt from it.

use catgen::particle::{simulate_reactant_quenched, MassPath, SimConfig};
use catgen::points::{point_process_at_level, reconstruct_distance_matrix};

fn main() -> catgen::Result<()> {
    let cfg = SimConfig { n: 5, t_max: 1.0, seed: 11, ..Default::default() };
    let catalyst = MassPath::constant(1.0, 1.0);
    let (_, forest) = simulate_reactant_quenched(&cfg, &catalyst)?;

    let p = point_process_at_level(&forest, 1.0, 1.0 / cfg.n as f64)?;
    let pop = forest.level_set(1.0).len();
    println!("{pop} individuals at level 1 in {} trees", p.tree_count(pop));
    print!("{}", p.to_csv());

    let d = reconstruct_distance_matrix(&p);
    let pts = forest.level_set(1.0);
    let worst = (0..pts.len())
        .flat_map(|i| (0..pts.len()).map(move |j| (i, j)))
        .map(|(i, j)| (d[i][j] - forest.genealogical_distance(pts[i], pts[j]).unwrap()).abs())
        .fold(0.0, f64::max);
    println!("largest disagreement with direct distances: {worst}");
    Ok(())
}
