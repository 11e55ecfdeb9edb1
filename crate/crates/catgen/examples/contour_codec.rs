//! Encode a random forest as its contour excursion, decode it back, and cut
//! the excursion above a level.

use catgen::contour::{contour_from_forest, excise_above, tree_from_excursion};
use catgen::rtree::random_dyadic_forest;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> catgen::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // Draw until the forest has some branching to show.
    let forest = loop {
        let f = random_dyadic_forest(&mut rng, 25, 8, 8);
        if f.leaf_count() >= 4 {
            break f;
        }
    };
    println!("forest: {} nodes, {} leaves, height {}", forest.len(), forest.leaf_count(), forest.height());

    let e = contour_from_forest(&forest, 2.0)?;
    println!("contour: {} breakpoints, duration {} (= total length {})", e.points.len(), e.duration(), forest.total_length());

    let back = tree_from_excursion(&e);
    println!("decoded forest is an ordered isometric copy: {}", back.ordered_isometric(&forest));

    let t = forest.height() / 2.0;
    let cut = excise_above(&e, t);
    let same = tree_from_excursion(&cut).ordered_isometric(&forest.truncate(t));
    println!("excising above {t} gives the contour of the truncation: {same}");
    Ok(())
}
