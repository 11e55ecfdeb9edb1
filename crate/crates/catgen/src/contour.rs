//! Contour codec: depth-first traversal of an ordered forest at constant
//! speed, and the inverse map that reads a tree off a nonnegative
//! piecewise-linear excursion.

use std::fmt::Write as _;

use crate::error::{input, Error, Result};
use crate::rtree::{fmt_f64, parse_f64, FamilyForest, Node};

/// Piecewise-linear nonnegative path from `(0, 0)` to `(U, 0)`, stored by its
/// breakpoints. `speed` records the traversal speed when the path is a contour.
#[derive(Clone, Debug, PartialEq)]
pub struct Excursion {
    pub points: Vec<(f64, f64)>,
    pub speed: Option<f64>,
}

impl Excursion {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let e = Excursion { points, speed: None };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.points;
        if p.is_empty() || p[0] != (0.0, 0.0) || p.last().unwrap().1 != 0.0 {
            return input("excursion must start at (0, 0) and end at height 0");
        }
        for w in p.windows(2) {
            if !(w[1].0 > w[0].0) {
                return input(format!("breakpoint times must increase strictly (at u={})", w[1].0));
            }
        }
        if p.iter().any(|&(u, e)| !(e >= 0.0) || !u.is_finite() || !e.is_finite()) {
            return input("excursion heights must be finite and nonnegative");
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.0)
    }

    pub fn max_height(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    /// Linear interpolation at time `u` (clamped to the domain).
    pub fn eval(&self, u: f64) -> f64 {
        let p = &self.points;
        if u <= p[0].0 {
            return p[0].1;
        }
        let i = p.partition_point(|q| q.0 <= u);
        if i >= p.len() {
            return p[p.len() - 1].1;
        }
        let (a, b) = (p[i - 1], p[i]);
        a.1 + (b.1 - a.1) * (u - a.0) / (b.0 - a.0)
    }

    /// Heights at the local extrema, with flat stretches and interior points
    /// of monotone runs removed.
    pub fn extrema(&self) -> Vec<f64> {
        let mut h: Vec<f64> = Vec::with_capacity(self.points.len());
        for &(_, e) in &self.points {
            if h.last() == Some(&e) {
                continue;
            }
            if h.len() >= 2 {
                let (a, b) = (h[h.len() - 2], h[h.len() - 1]);
                if (b > a) == (e > b) {
                    h.pop();
                }
            }
            h.push(e);
        }
        h
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "speed={}", self.speed.map_or("none".into(), fmt_f64));
        for &(u, e) in &self.points {
            let _ = writeln!(s, "{} {}", fmt_f64(u), fmt_f64(e));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Excursion> {
        let mut speed = None;
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(s) = line.strip_prefix("speed=") {
                speed = if s == "none" { None } else { Some(parse_f64(s, i + 1)?) };
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(u), Some(e), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Parse { line: i + 1, msg: "expected two columns `u e`".into() });
            };
            points.push((parse_f64(u, i + 1)?, parse_f64(e, i + 1)?));
        }
        let e = Excursion { points, speed };
        e.validate()?;
        Ok(e)
    }
}

/// Appends a breakpoint, merging it into the previous one when the path keeps
/// moving in the same direction.
fn push_turn(points: &mut Vec<(f64, f64)>, u: f64, h: f64) {
    let n = points.len();
    if n >= 2 {
        let (a, b) = (points[n - 2].1, points[n - 1].1);
        if (b > a && h > b) || (b < a && h < b) {
            points[n - 1] = (u, h);
            return;
        }
    }
    if n >= 1 && points[n - 1].0 == u {
        return;
    }
    points.push((u, h));
}

/// Contour of a finite forest traversed depth-first at speed `sigma`.
/// Trees are visited in root order and the path touches 0 between them.
pub fn contour_from_forest(f: &FamilyForest, sigma: f64) -> Result<Excursion> {
    if !(sigma > 0.0) {
        return input(format!("speed must be positive, got {sigma}"));
    }
    if !f.is_finite() {
        return input("cannot encode a forest with open (infinite) lifetimes");
    }
    let mut points = vec![(0.0, 0.0)];
    let (mut u, mut h) = (0.0f64, 0.0f64);
    let mut go = |to: f64, points: &mut Vec<(f64, f64)>| {
        if to != h {
            u += (to - h).abs() / sigma;
            h = to;
            push_turn(points, u, h);
        }
    };
    // Explicit stack of (node, next child index) keeps deep trees off the call stack.
    for &r in &f.roots {
        let mut stack = vec![(r, 0usize)];
        go(f.nodes[r].death, &mut points);
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            let node = &f.nodes[v];
            if *next < node.children.len() {
                let c = node.children[*next];
                *next += 1;
                go(f.nodes[c].death, &mut points);
                stack.push((c, 0));
            } else {
                go(node.birth, &mut points);
                stack.pop();
            }
        }
    }
    Ok(Excursion { points, speed: Some(sigma) })
}

/// Reads the ordered forest coded by an excursion. Local maxima become leaves,
/// local minima branch points, and interior zeros separate trees. Equal-height
/// minima produce distinct branch points joined by zero-length edges, in
/// traversal order.
pub fn tree_from_excursion(e: &Excursion) -> FamilyForest {
    let h = e.extrema();
    let mut f = FamilyForest::new();
    let mut path: Vec<usize> = Vec::new();
    for w in h.windows(2) {
        let (from, to) = (w[0], w[1]);
        if to > from {
            if path.is_empty() {
                let r = f.push_root(f64::NAN);
                path.push(r);
            }
            let top = *path.last().unwrap();
            f.nodes[top].death = to;
        } else if to == 0.0 {
            path.clear();
        } else {
            while f.nodes[*path.last().unwrap()].birth > to {
                path.pop();
            }
            let t = *path.last().unwrap();
            let old_children = std::mem::take(&mut f.nodes[t].children);
            let x = f.nodes.len();
            f.nodes.push(Node { parent: Some(t), birth: to, death: f.nodes[t].death, children: old_children.clone(), label: Vec::new() });
            for c in old_children {
                f.nodes[c].parent = Some(x);
            }
            let y = f.nodes.len();
            f.nodes.push(Node { parent: Some(t), birth: to, death: f64::NAN, children: Vec::new(), label: Vec::new() });
            f.nodes[t].death = to;
            f.nodes[t].children = vec![x, y];
            path.push(y);
        }
    }
    f.relabel();
    f
}

/// Removes the parts of `e` above level `t` and closes the gaps, i.e. runs `e`
/// along the inverse of the clock `s -> |{r <= s : e(r) <= t}|`.
pub fn excise_above(e: &Excursion, t: f64) -> Excursion {
    let mut out: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let mut clock = 0.0;
    let push = |u: f64, h: f64, out: &mut Vec<(f64, f64)>| {
        let last = *out.last().unwrap();
        if u > last.0 {
            push_turn(out, u, h);
        }
    };
    for w in e.points.windows(2) {
        let ((u0, h0), (u1, h1)) = (w[0], w[1]);
        let du = u1 - u0;
        match (h0 <= t, h1 <= t) {
            (true, true) => {
                clock += du;
                push(clock, h1, &mut out);
            }
            (true, false) => {
                clock += du * (t - h0) / (h1 - h0);
                push(clock, t, &mut out);
            }
            (false, true) => {
                clock += du * (h1 - t) / (h1 - h0);
                push(clock, h1, &mut out);
            }
            (false, false) => {}
        }
    }
    Excursion { points: out, speed: e.speed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rtree::random_dyadic_forest;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_edge_is_a_triangle() {
        let e = contour_from_forest(&FamilyForest::single_edge(1.5), 2.0).unwrap();
        assert_eq!(e.points, vec![(0.0, 0.0), (0.75, 1.5), (1.5, 0.0)]);
    }

    #[test]
    fn cherry_contour_and_back() {
        let c = FamilyForest::cherry(0.5, 1.0);
        let e = contour_from_forest(&c, 2.0).unwrap();
        assert_eq!(e.extrema(), vec![0.0, 1.0, 0.5, 1.0, 0.0]);
        assert_eq!(e.duration(), 2.0 * c.total_length() / 2.0);
        let back = tree_from_excursion(&Excursion::new(vec![(0.0, 0.0), (1.0, 1.0), (1.5, 0.5), (2.0, 1.0), (3.0, 0.0)]).unwrap());
        assert!(back.ordered_isometric(&c));
    }

    #[test]
    fn triangle_decodes_to_edge() {
        let f = tree_from_excursion(&Excursion::new(vec![(0.0, 0.0), (1.0, 2.0), (2.0, 0.0)]).unwrap());
        assert!(f.ordered_isometric(&FamilyForest::single_edge(2.0)));
    }

    #[test]
    fn tied_minima_become_zero_length_edges() {
        let e = Excursion::new(vec![(0.0, 0.0), (1.0, 1.0), (1.5, 0.5), (2.0, 1.0), (2.5, 0.5), (3.0, 1.0), (4.0, 0.0)]).unwrap();
        let f = tree_from_excursion(&e);
        assert_eq!(f.leaf_count(), 3);
        assert!(f.nodes.iter().any(|n| n.length() == 0.0));
        let back = contour_from_forest(&f, 1.0).unwrap();
        assert_eq!(back.extrema(), e.extrema());
    }

    #[test]
    fn excision_examples() {
        let tri = Excursion::new(vec![(0.0, 0.0), (2.0, 2.0), (4.0, 0.0)]).unwrap();
        assert_eq!(excise_above(&tri, 3.0), tri);
        let cut = excise_above(&tri, 1.0);
        assert_eq!(cut.points, vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]);
    }

    proptest! {
        #[test]
        fn excision_matches_truncation(seed in 0u64..10_000, frac in 0.05f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_dyadic_forest(&mut rng, 40, 8, 12);
            let e = contour_from_forest(&f, 2.0).unwrap();
            // At t = 0 the excursion collapses to a point and cannot keep
            // several zero-height roots apart, so the level stays positive.
            let t = ((f.height() * frac * 8.0).round() / 8.0).max(0.125);
            let cut = excise_above(&e, t);
            prop_assert!(cut.max_height() <= t);
            prop_assert!(tree_from_excursion(&cut).ordered_isometric(&f.truncate(t)));
            let (_, hi) = tree_from_excursion(&e).gh_distance_bounds(&tree_from_excursion(&cut));
            prop_assert!(hi <= (e.max_height() - t).max(0.0) + 1e-9);
        }

        #[test]
        fn leaf_order_matches_peaks(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_dyadic_forest(&mut rng, 40, 8, 12);
            let e = contour_from_forest(&f, 2.0).unwrap();
            let ex = e.extrema();
            let peaks: Vec<f64> = ex.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).map(|w| w[1]).collect();
            let leaves: Vec<f64> = f.preorder().into_iter().filter(|&v| f.nodes[v].children.is_empty()).map(|v| f.nodes[v].death).collect();
            prop_assert_eq!(peaks, leaves);
        }
    }
}
