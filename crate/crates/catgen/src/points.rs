//! Level-t genealogical point processes and downward-excursion depths.
//!
//! The population alive at level `t`, listed in the forest's linear order,
//! is summarised by the heights of the most recent common ancestors of
//! consecutive individuals. Because distances on a level form an
//! ultrametric, the full distance matrix is recovered from the consecutive
//! ones: `d(x_i, x_l)` is the largest neighbour distance between `i` and `l`.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Open01};

use crate::contour::Excursion;
use crate::diffusion::DiffusionPath;
use crate::error::{input, Error, Result};
use crate::rng::stream_rng;
use crate::rtree::{fmt_f64, parse_f64, FamilyForest};

#[derive(Clone, Debug, PartialEq)]
pub struct GenealogicalPointProcess {
    pub level: f64,
    pub spacing: f64,
    /// Number of neighbour pairs lying in different trees (their mark is 0).
    pub zero_marks: usize,
    /// `(ell, h)` with `ell = i * spacing` and `h` the neighbour MRCA height.
    pub points: Vec<(f64, f64)>,
}

impl GenealogicalPointProcess {
    /// Number of distinct trees represented on the level, given its population.
    pub fn tree_count(&self, population: usize) -> usize {
        if population == 0 {
            0
        } else {
            self.zero_marks + 1
        }
    }

    /// Interior marks, i.e. neighbour pairs sharing a tree.
    pub fn interior_heights(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1).filter(|&h| h > 0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# t={} spacing={} zero_marks={}", fmt_f64(self.level), fmt_f64(self.spacing), self.zero_marks);
        s.push_str("ell,h\n");
        for &(l, h) in &self.points {
            let _ = writeln!(s, "{},{}", fmt_f64(l), fmt_f64(h));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty point-process file"))?;
        let mut p = GenealogicalPointProcess { level: f64::NAN, spacing: f64::NAN, zero_marks: 0, points: Vec::new() };
        for tok in header.trim_start_matches('#').split_whitespace() {
            match tok.split_once('=') {
                Some(("t", v)) => p.level = parse_f64(v, 1)?,
                Some(("spacing", v)) => p.spacing = parse_f64(v, 1)?,
                Some(("zero_marks", v)) => p.zero_marks = v.parse().map_err(|_| bad(1, "bad zero_marks"))?,
                _ => return Err(bad(1, &format!("unknown header field {tok}"))),
            }
        }
        for (i, line) in lines {
            if line.trim().is_empty() || line.trim() == "ell,h" {
                continue;
            }
            let (l, h) = line.split_once(',').ok_or_else(|| bad(i + 1, "expected `ell,h`"))?;
            p.points.push((parse_f64(l.trim(), i + 1)?, parse_f64(h.trim(), i + 1)?));
        }
        Ok(p)
    }
}

/// Point process of the level-`t` population of `f` with spacing `spacing`.
pub fn point_process_at_level(f: &FamilyForest, t: f64, spacing: f64) -> Result<GenealogicalPointProcess> {
    if !(spacing > 0.0) {
        return input(format!("spacing must be positive, got {spacing}"));
    }
    if let Some(cap) = f.height_cap {
        if t > cap {
            return input(format!("level {t} lies above the height cap {cap}"));
        }
    }
    let level = f.level_set(t);
    let depth = f.depths();
    let mut points = Vec::with_capacity(level.len().saturating_sub(1));
    let mut zero_marks = 0;
    for (i, w) in level.windows(2).enumerate() {
        let h = match f.lca(w[0].node, w[1].node, &depth) {
            None => {
                zero_marks += 1;
                0.0
            }
            Some(_) => f.mrca_height(w[0], w[1], &depth),
        };
        points.push(((i + 1) as f64 * spacing, h));
    }
    Ok(GenealogicalPointProcess { level: t, spacing, zero_marks, points })
}

/// Full distance matrix of the level population, from the consecutive
/// MRCA heights: `d(x_i, x_l) = 2t - 2 min(h_{i+1}, ..., h_l)`.
#[allow(clippy::needless_range_loop)]
pub fn reconstruct_distance_matrix(p: &GenealogicalPointProcess) -> Vec<Vec<f64>> {
    let k = p.points.len() + 1;
    let mut d = vec![vec![0.0; k]; k];
    for i in 0..k {
        let mut low = f64::INFINITY;
        for l in i + 1..k {
            low = low.min(p.points[l - 1].1);
            d[i][l] = 2.0 * (p.level - low);
            d[l][i] = d[i][l];
        }
    }
    d
}

/// Downward excursions of an exact piecewise-linear path below level `t`:
/// one `(index, depth)` per excursion that leaves `t` and returns to it. The
/// index counts excursions, matching the individual-count coordinate of
/// particle forests.
pub fn excursion_depths_below_level(e: &Excursion, t: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut seen = false;
    let mut inside = false;
    let mut low = f64::INFINITY;
    for w in e.points.windows(2) {
        let (a, b) = (w[0].1, w[1].1);
        if inside {
            low = low.min(b);
            if b >= t {
                out.push(((out.len() + 1) as f64, t - low));
                inside = false;
            }
        } else if seen && a >= t && b < t {
            inside = true;
            low = b;
        }
        seen |= b >= t;
    }
    out
}

/// Settings for depth extraction from a sampled path.
#[derive(Clone, Debug)]
pub struct DepthOptions {
    /// Excursions shallower than this are dropped. `None` uses ten times the
    /// root-mean-square grid increment of the path.
    pub depth_floor: Option<f64>,
    /// Multiplier converting the semimartingale local time at `t` into the
    /// index coordinate (1 keeps local-time units).
    pub index_scale: f64,
    /// When set, each grid step is treated as a Brownian bridge with the
    /// step's quadratic-variation increment as variance: its minimum is
    /// sampled for the depth, and an unseen visit above `t` between two
    /// sub-level samples splits the excursion.
    pub bridge_seed: Option<u64>,
}

impl Default for DepthOptions {
    fn default() -> Self {
        DepthOptions { depth_floor: None, index_scale: 1.0, bridge_seed: None }
    }
}

/// Result of depth extraction on a sampled path.
#[derive(Clone, Debug, Default)]
pub struct SampledDepths {
    /// `(index, depth)` per completed excursion below the level.
    pub entries: Vec<(f64, f64)>,
    /// Total index accumulated at the level over the whole path.
    pub total_index: f64,
    pub depth_floor: f64,
}

/// Downward excursions of a sampled path below `t`. The index is the
/// discrete Tanaka estimate of the local time at `t` accumulated before the
/// excursion starts, scaled by `opts.index_scale`.
pub fn sampled_depths_below_level(path: &DiffusionPath, t: f64, opts: &DepthOptions) -> SampledDepths {
    let v = &path.values;
    let n = v.len().saturating_sub(1);
    let var = |k: usize| match &path.qv_increments {
        Some(q) => q[k],
        None => (v[k + 1] - v[k]).powi(2),
    };
    let floor = opts.depth_floor.unwrap_or_else(|| {
        let mean = (0..n).map(var).sum::<f64>() / n.max(1) as f64;
        10.0 * mean.sqrt()
    });
    let mut rng = opts.bridge_seed.map(|s| stream_rng(s, crate::rng::stream::AUX));
    let mut half_lt = 0.0;
    let mut entries = Vec::new();
    let mut seen = false;
    let mut inside = false;
    let mut low = f64::INFINITY;
    let mut start_index = 0.0;
    let scale = 2.0 * opts.index_scale;
    for k in 0..n {
        let (a, b) = (v[k], v[k + 1]);
        let s2 = var(k);
        if inside {
            let mut split = false;
            if b < t {
                if let Some(r) = rng.as_mut() {
                    if s2 > 0.0 {
                        let u: f64 = Open01.sample(r);
                        low = low.min(0.5 * (a + b - ((b - a).powi(2) - 2.0 * s2 * u.ln()).sqrt()));
                        split = r.random::<f64>() < (-2.0 * (t - a) * (t - b) / s2).exp();
                    }
                }
            }
            low = low.min(b);
            if b >= t || split {
                if t - low > floor {
                    entries.push((start_index, t - low));
                }
                inside = split;
                low = b;
                start_index = scale * half_lt;
            }
        } else if seen && a >= t && b < t {
            inside = true;
            low = b;
        }
        half_lt += (b - t).max(0.0) - (a - t).max(0.0) - if a > t { b - a } else { 0.0 };
        if !inside {
            start_index = scale * half_lt;
        }
        seen |= b >= t;
    }
    SampledDepths { entries, total_index: scale * half_lt, depth_floor: floor }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::contour_from_forest;
    use crate::rtree::random_dyadic_forest;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cherry_gives_one_point() {
        let p = point_process_at_level(&FamilyForest::cherry(0.5, 1.0), 1.0, 1.0).unwrap();
        assert_eq!(p.points, vec![(1.0, 0.5)]);
        let single = point_process_at_level(&FamilyForest::single_edge(2.0), 1.0, 1.0).unwrap();
        assert!(single.points.is_empty());
    }

    #[test]
    fn separate_trees_give_zero_mark() {
        let mut f = FamilyForest::new();
        f.push_root(1.0);
        f.push_root(1.0);
        let p = point_process_at_level(&f, 1.0, 0.5).unwrap();
        assert_eq!((p.points.clone(), p.zero_marks), (vec![(0.5, 0.0)], 1));
        let d = reconstruct_distance_matrix(&p);
        assert_eq!(d[0][1], 2.0);
    }

    #[test]
    fn reconstruction_uses_max_rule() {
        let p = GenealogicalPointProcess { level: 1.0, spacing: 1.0, zero_marks: 0, points: vec![(1.0, 0.8), (2.0, 0.5)] };
        let d = reconstruct_distance_matrix(&p);
        assert!((d[0][1] - 0.4).abs() < 1e-12 && (d[0][2] - 1.0).abs() < 1e-12 && (d[1][2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_depth_examples() {
        let mono = Excursion::new(vec![(0.0, 0.0), (1.0, 1.0), (1.5, 0.0)]).unwrap();
        assert!(excursion_depths_below_level(&mono, 0.5).is_empty());
        let dip = Excursion::new(vec![(0.0, 0.0), (1.0, 1.0), (1.6, 0.4), (2.2, 1.0), (3.2, 0.0)]).unwrap();
        let d = excursion_depths_below_level(&dip, 1.0);
        assert_eq!(d.len(), 1);
        assert!((d[0].1 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let p = GenealogicalPointProcess { level: 1.0, spacing: 0.02, zero_marks: 1, points: vec![(0.02, 0.0), (0.04, 0.3)] };
        assert_eq!(GenealogicalPointProcess::from_csv(&p.to_csv()).unwrap(), p);
    }

    #[test]
    fn sampled_depths_find_a_dip() {
        let values = vec![0.0, 0.5, 1.2, 0.9, 0.3, 0.8, 1.3, 0.6, 0.0];
        let path = DiffusionPath { dt: 1.0, values, absorbed_at: None, qv_increments: None };
        let d = sampled_depths_below_level(&path, 1.0, &DepthOptions { depth_floor: Some(0.0), ..Default::default() });
        assert_eq!(d.entries.len(), 1);
        assert!((d.entries[0].1 - 0.7).abs() < 1e-12);
        assert!(d.total_index > 0.0);
    }

    proptest! {
        #[test]
        fn reconstruction_matches_forest(seed in 0u64..100_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_dyadic_forest(&mut rng, 60, 8, 12);
            let t = (f.height() * rng.random_range(0.0..1.0) * 8.0).floor() / 8.0 + 1.0 / 16.0;
            let p = point_process_at_level(&f, t, 0.1).unwrap();
            let lv = f.level_set(t);
            let d = reconstruct_distance_matrix(&p);
            for i in 0..lv.len() { for j in 0..lv.len() {
                let want = f.genealogical_distance(lv[i], lv[j]).unwrap();
                prop_assert_eq!(d[i][j], want);
            }}
            let depths = excursion_depths_below_level(&contour_from_forest(&f, 2.0).unwrap(), t);
            let want: Vec<f64> = p.points.iter().map(|q| t - q.1).collect();
            prop_assert_eq!(depths.iter().map(|x| x.1).collect::<Vec<_>>(), want);
            // Truncating above the level leaves the process unchanged.
            prop_assert_eq!(point_process_at_level(&f.truncate(t), t, 0.1).unwrap(), p);
        }
    }
}
