//! Race the catalyst against the reactant in the catalytic Feller diffusion
//! and compare the fraction of reactant-first extinctions with its closed
//! form.

use catgen::diffusion::{race, FellerConfig, RaceOutcome};
use catgen::rng::replica_seed;
use catgen::verify::oracles::hitting_probability;
use rayon::prelude::*;

fn main() -> catgen::Result<()> {
    let reps = 2000;
    let outcomes: Vec<RaceOutcome> = (0..reps)
        .into_par_iter()
        .map(|i| race(&FellerConfig { dt: 1e-3, horizon: 500.0, seed: replica_seed(9, i), ..Default::default() }).map(|r| r.0))
        .collect::<catgen::Result<_>>()?;
    let first = outcomes.iter().filter(|&&o| o == RaceOutcome::ReactantFirst).count();
    let p = first as f64 / reps as f64;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    println!("reactant dies first in {p:.4} ± {se:.4} of {reps} races (dt = 1e-3)");
    println!("closed form: {:.4}", hitting_probability(1.0, 1.0, 1.0, 1.0));
    Ok(())
}
