//! Build a small family forest by hand and query its metric structure:
//! distances, level sets, truncation, trimming and ancestor sets.

use catgen::rtree::FamilyForest;

fn main() -> catgen::Result<()> {
    // Root edge to 0.5, one child splits again at 0.8, leaves at height 1.
    let mut f = FamilyForest::new();
    let root = f.push_root(0.5);
    let a = f.push_child(root, 0.8);
    f.push_child(root, 1.0);
    f.push_child(a, 1.0);
    f.push_child(a, 1.0);
    f.relabel();
    f.validate()?;

    let top = f.level_set(1.0);
    println!("population at level 1: {}", top.len());
    for i in 0..top.len() {
        let row: Vec<String> = (0..top.len()).map(|j| format!("{:.2}", f.genealogical_distance(top[i], top[j]).unwrap())).collect();
        println!("  {}", row.join("  "));
    }

    let low = f.truncate(0.6);
    println!("truncated at 0.6: height {}, {} points on the cap", low.height(), low.level_set(0.6).len());
    println!("0.3-trim keeps total length {:.2} of {:.2}", f.trim(0.3)?.total_length(), f.total_length());
    println!("ancestors 0.1 back: {}, 0.3 back: {}", f.ancestors(1.0, 0.1)?.len(), f.ancestors(1.0, 0.3)?.len());

    let (lo, hi) = f.gh_distance_bounds(&low);
    println!("rooted GH distance to the truncation lies in [{lo:.3}, {hi:.3}]");

    // Forests serialize to a line format that round-trips exactly.
    let text = f.to_text();
    print!("{text}");
    assert!(FamilyForest::from_text(&text)?.ordered_isometric(&f));
    Ok(())
}
