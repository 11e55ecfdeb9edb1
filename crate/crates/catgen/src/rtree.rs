//! Rooted, linearly ordered R-trees stored as explicit node records.
//!
//! Every node is one lifetime: an edge from `birth` to `death` in height
//! coordinates. Children are born at their parent's death and appear in the
//! linear (depth-first) order. All roots sit at height 0 and are glued into a
//! single root point, so two points in different trees are at distance
//! `t1 + t2`.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::contour::{contour_from_forest, Excursion};
use crate::error::{input, Error, Result};

/// Death-time sentinel for individuals still alive when the recording stopped.
pub const ALIVE: f64 = f64::INFINITY;

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub parent: Option<usize>,
    pub birth: f64,
    pub death: f64,
    pub children: Vec<usize>,
    /// Ulam–Harris label: root index then child indices, all 1-based.
    pub label: Vec<u32>,
}

impl Node {
    pub fn length(&self) -> f64 {
        self.death - self.birth
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FamilyForest {
    pub nodes: Vec<Node>,
    pub roots: Vec<usize>,
    pub height_cap: Option<f64>,
}

/// A point of the forest: a node and a distance above that node's birth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreePoint {
    pub node: usize,
    pub offset: f64,
}

impl FamilyForest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a root born at height 0 and returns its id.
    pub fn push_root(&mut self, death: f64) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            parent: None,
            birth: 0.0,
            death,
            children: Vec::new(),
            label: vec![self.roots.len() as u32 + 1],
        });
        self.roots.push(id);
        id
    }

    /// Adds a child of `parent`, born at the parent's death.
    pub fn push_child(&mut self, parent: usize, death: f64) -> usize {
        let id = self.nodes.len();
        let birth = self.nodes[parent].death;
        let mut label = self.nodes[parent].label.clone();
        label.push(self.nodes[parent].children.len() as u32 + 1);
        self.nodes.push(Node { parent: Some(parent), birth, death, children: Vec::new(), label });
        self.nodes[parent].children.push(id);
        id
    }

    /// A single edge of length `h`.
    pub fn single_edge(h: f64) -> Self {
        let mut f = Self::new();
        f.push_root(h);
        f
    }

    /// A root edge up to `split` with two leaves at height `leaf`.
    pub fn cherry(split: f64, leaf: f64) -> Self {
        let mut f = Self::new();
        let r = f.push_root(split);
        f.push_child(r, leaf);
        f.push_child(r, leaf);
        f
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.nodes.iter().all(|n| n.death.is_finite())
    }

    /// Largest leaf height; 0 for an empty forest.
    pub fn height(&self) -> f64 {
        self.nodes.iter().map(|n| n.death).fold(0.0, f64::max)
    }

    pub fn total_length(&self) -> f64 {
        self.nodes.iter().map(Node::length).sum()
    }

    pub fn point_height(&self, p: TreePoint) -> f64 {
        self.nodes[p.node].birth + p.offset
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].children.is_empty())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Number of individuals alive at time `t` (born at or before, dying after).
    pub fn population_at(&self, t: f64) -> usize {
        self.nodes.iter().filter(|n| n.birth <= t && t < n.death).count()
    }

    /// Node ids in depth-first preorder, respecting root and child order.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack: Vec<usize> = self.roots.iter().rev().copied().collect();
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(self.nodes[v].children.iter().rev());
        }
        out
    }

    /// Maximal death time in each node's subtree.
    pub fn subtree_heights(&self) -> Vec<f64> {
        let mut h: Vec<f64> = self.nodes.iter().map(|n| n.death).collect();
        for &v in self.preorder().iter().rev() {
            if let Some(p) = self.nodes[v].parent {
                h[p] = h[p].max(h[v]);
            }
        }
        h
    }

    /// Number of ancestors of each node.
    pub fn depths(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.nodes.len()];
        for v in self.preorder() {
            if let Some(p) = self.nodes[v].parent {
                d[v] = d[p] + 1;
            }
        }
        d
    }

    /// Recomputes Ulam–Harris labels from the current root and child order.
    pub fn relabel(&mut self) {
        for (i, &r) in self.roots.clone().iter().enumerate() {
            self.nodes[r].label = vec![i as u32 + 1];
        }
        for v in self.preorder() {
            let base = self.nodes[v].label.clone();
            for (j, c) in self.nodes[v].children.clone().into_iter().enumerate() {
                let mut l = base.clone();
                l.push(j as u32 + 1);
                self.nodes[c].label = l;
            }
        }
    }

    /// Checks the structural invariants of a family forest.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        for v in self.preorder() {
            if seen[v] {
                return input(format!("node {v} reachable twice"));
            }
            seen[v] = true;
            let n = &self.nodes[v];
            if !(n.birth >= 0.0) || !(n.death >= n.birth) {
                return input(format!("node {v} has lifetime [{}, {}]", n.birth, n.death));
            }
            if let Some(cap) = self.height_cap {
                if n.death > cap {
                    return input(format!("node {v} dies above the height cap"));
                }
            }
            for &c in &n.children {
                if self.nodes[c].parent != Some(v) || self.nodes[c].birth != n.death {
                    return input(format!("child {c} inconsistent with parent {v}"));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return input("node not reachable from any root");
        }
        for &r in &self.roots {
            if self.nodes[r].parent.is_some() || self.nodes[r].birth != 0.0 {
                return input(format!("root {r} must be parentless and born at 0"));
            }
        }
        Ok(())
    }

    fn check_point(&self, p: TreePoint) -> Result<()> {
        let Some(n) = self.nodes.get(p.node) else {
            return input(format!("node id {} out of range", p.node));
        };
        if !(p.offset >= 0.0 && p.offset <= n.length()) {
            return input(format!("offset {} outside lifetime of node {}", p.offset, p.node));
        }
        Ok(())
    }

    /// Lowest common ancestor node, or `None` for different trees.
    pub fn lca(&self, mut u: usize, mut v: usize, depth: &[u32]) -> Option<usize> {
        while depth[u] > depth[v] {
            u = self.nodes[u].parent?;
        }
        while depth[v] > depth[u] {
            v = self.nodes[v].parent?;
        }
        while u != v {
            u = self.nodes[u].parent?;
            v = self.nodes[v].parent?;
        }
        Some(u)
    }

    /// Height of the most recent common ancestor of two points; 0 across trees.
    pub fn mrca_height(&self, a: TreePoint, b: TreePoint, depth: &[u32]) -> f64 {
        let (ta, tb) = (self.point_height(a), self.point_height(b));
        match self.lca(a.node, b.node, depth) {
            None => 0.0,
            Some(w) if w == a.node && w == b.node => ta.min(tb),
            Some(w) if w == a.node => ta,
            Some(w) if w == b.node => tb,
            Some(w) => self.nodes[w].death,
        }
    }

    /// Genealogical distance `t1 + t2 - 2 * mrca height`.
    pub fn genealogical_distance(&self, a: TreePoint, b: TreePoint) -> Result<f64> {
        self.check_point(a)?;
        self.check_point(b)?;
        let depth = self.depths();
        Ok(self.point_height(a) + self.point_height(b) - 2.0 * self.mrca_height(a, b, &depth))
    }

    /// The closed ball of radius `t` around the root. Nodes dying above `t`
    /// are clipped and lose their children; the height cap becomes `t`.
    pub fn truncate(&self, t: f64) -> FamilyForest {
        let mut out = FamilyForest::new();
        let mut stack: Vec<(usize, Option<usize>)> =
            self.roots.iter().rev().map(|&r| (r, None)).collect();
        while let Some((v, parent)) = stack.pop() {
            let n = &self.nodes[v];
            let keep = n.birth < t || (parent.is_none() && n.birth <= t);
            if !keep {
                continue;
            }
            let death = n.death.min(t);
            let id = match parent {
                None => out.push_root(death),
                Some(p) => out.push_child(p, death),
            };
            if n.death <= t {
                stack.extend(n.children.iter().rev().map(|&c| (c, Some(id))));
            }
        }
        out.height_cap = Some(self.height_cap.map_or(t, |c| c.min(t)));
        out
    }

    /// Points at height exactly `t`, in linear order.
    pub fn level_set(&self, t: f64) -> Vec<TreePoint> {
        self.preorder()
            .into_iter()
            .filter(|&v| {
                let n = &self.nodes[v];
                (n.birth < t && t <= n.death) || (n.parent.is_none() && n.birth == t)
            })
            .map(|v| TreePoint { node: v, offset: t - self.nodes[v].birth })
            .collect()
    }

    /// The ε-trimming: points having a descendant at distance at least ε.
    /// Unary nodes created by clipping are merged with their only child.
    pub fn trim(&self, eps: f64) -> Result<FamilyForest> {
        if !(eps > 0.0) {
            return input(format!("trimming requires eps > 0, got {eps}"));
        }
        let reach = self.subtree_heights();
        let mut out = FamilyForest::new();
        for &r in &self.roots {
            if reach[r] - eps > 0.0 {
                self.trim_into(r, None, eps, &reach, &mut out);
            }
        }
        if out.roots.is_empty() {
            out.push_root(0.0);
        }
        out.height_cap = self.height_cap.map(|c| c - eps).filter(|c| *c >= 0.0);
        out.relabel();
        Ok(out)
    }

    fn trim_into(&self, v: usize, parent: Option<usize>, eps: f64, reach: &[f64], out: &mut FamilyForest) {
        let top = reach[v] - eps;
        // Follow chains where only one child survives, so no unary node is emitted.
        let mut cur = v;
        loop {
            let n = &self.nodes[cur];
            if n.death > top {
                break;
            }
            let kept: Vec<usize> =
                n.children.iter().copied().filter(|&c| reach[c] - eps > n.death).collect();
            if kept.len() == 1 {
                cur = kept[0];
                continue;
            }
            break;
        }
        let n = &self.nodes[cur];
        let death = n.death.min(reach[cur] - eps);
        let id = match parent {
            None => out.push_root(death),
            Some(p) => out.push_child(p, death),
        };
        if n.death <= reach[cur] - eps {
            for &c in &n.children {
                if reach[c] - eps > n.death {
                    self.trim_into(c, Some(id), eps, reach, out);
                }
            }
        }
    }

    /// Ancestors at height `t - eps` of the points alive at height `t`.
    pub fn ancestors(&self, t: f64, eps: f64) -> Result<Vec<TreePoint>> {
        if !(eps > 0.0 && eps <= t) {
            return input(format!("ancestors need 0 < eps <= t, got eps={eps}, t={t}"));
        }
        let reach = self.subtree_heights();
        Ok(self.level_set(t - eps).into_iter().filter(|p| reach[p.node] >= t).collect())
    }

    /// Merges unary nodes and drops zero-length non-root edges, producing a
    /// representative that is equal for isometric ordered forests.
    pub fn canonical(&self) -> FamilyForest {
        let mut out = FamilyForest::new();
        for &r in &self.roots {
            self.canon_into(r, None, &mut out);
        }
        out.height_cap = self.height_cap;
        out
    }

    fn canon_into(&self, v: usize, parent: Option<usize>, out: &mut FamilyForest) {
        let mut cur = v;
        while self.nodes[cur].children.len() == 1 {
            cur = self.nodes[cur].children[0];
        }
        let id = match parent {
            None => out.push_root(self.nodes[cur].death),
            Some(p) => out.push_child(p, self.nodes[cur].death),
        };
        for &c in &self.nodes[cur].children {
            if self.nodes[c].length() == 0.0 && !self.nodes[c].children.is_empty() {
                // A zero-length internal edge: splice its children in place.
                for &g in &self.nodes[c].children {
                    self.canon_into(g, Some(id), out);
                }
            } else {
                self.canon_into(c, Some(id), out);
            }
        }
    }

    /// Preorder list of (birth, death, child count) of the canonical form.
    pub fn signature(&self) -> Vec<(f64, f64, usize)> {
        let c = self.canonical();
        c.preorder().into_iter().map(|v| (c.nodes[v].birth, c.nodes[v].death, c.nodes[v].children.len())).collect()
    }

    /// Root-and-order-preserving isometry test on canonical forms.
    pub fn ordered_isometric(&self, other: &FamilyForest) -> bool {
        self.signature() == other.signature()
    }

    /// Points that serve as a skeleton: roots, branch points and leaves.
    fn skeleton(&self) -> Vec<TreePoint> {
        let c = self;
        let mut pts: Vec<TreePoint> = Vec::new();
        if let Some(&r) = c.roots.first() {
            pts.push(TreePoint { node: r, offset: 0.0 });
        }
        for v in c.preorder() {
            let n = &c.nodes[v];
            if n.length() > 0.0 || n.children.is_empty() {
                pts.push(TreePoint { node: v, offset: n.length() });
            }
        }
        pts
    }

    /// Certified bounds on the rooted Gromov–Hausdorff distance, taken as half
    /// the least distortion of a correspondence that pairs the roots.
    pub fn gh_distance_bounds(&self, other: &FamilyForest) -> (f64, f64) {
        let a = self.canonical();
        let b = other.canonical();
        let (ha, hb) = (a.height(), b.height());
        let (da, db) = (a.diameter(), b.diameter());
        let mut lower = 0.5 * (ha - hb).abs().max((da - db).abs());
        let mut upper = 0.5 * da.max(db);

        let (sa, sb) = (a.skeleton(), b.skeleton());
        if sa.len() + sb.len() <= 10 {
            // Roots are always included; the limit of 8 counts leaves and branch points.
            let ds = 0.5 * min_root_distortion(&a, &sa, &b, &sb);
            let slack = a.covering_radius() + b.covering_radius();
            lower = lower.max(ds - slack);
            upper = upper.min(ds + slack);
        }
        for (big, small, hbig, hsmall) in [(&a, &b, ha, hb), (&b, &a, hb, ha)] {
            if hsmall <= hbig && big.truncate(hsmall).ordered_isometric(small) {
                upper = upper.min(hbig - hsmall);
            }
        }
        if let (Ok(ea), Ok(eb)) = (contour_from_forest(&a, 2.0), contour_from_forest(&b, 2.0)) {
            upper = upper.min(0.5 * contour_correspondence_distortion(&ea, &eb));
        }
        (lower.min(upper), upper)
    }

    fn diameter(&self) -> f64 {
        // Two highest leaves in different subtrees of the glued root, or the
        // deepest pair across any branch point.
        let reach = self.subtree_heights();
        let mut best = 0.0f64;
        let mut root_tops: Vec<f64> = self.roots.iter().map(|&r| reach[r]).collect();
        root_tops.sort_by(|x, y| y.total_cmp(x));
        best = best.max(root_tops.first().copied().unwrap_or(0.0) + root_tops.get(1).copied().unwrap_or(0.0));
        for n in &self.nodes {
            if n.children.len() >= 2 {
                let mut tops: Vec<f64> = n.children.iter().map(|&c| reach[c]).collect();
                tops.sort_by(|x, y| y.total_cmp(x));
                best = best.max(tops[0] + tops[1] - 2.0 * n.death);
            }
        }
        best
    }

    fn covering_radius(&self) -> f64 {
        self.nodes.iter().map(|n| 0.5 * n.length()).fold(0.0, f64::max)
    }

    /// Sum of squared distances over adjacent pairs of a finite net whose
    /// points sit on the levels `k * mesh`.
    ///
    /// The net holds the roots, every point at level `k * mesh` with a
    /// descendant at `(k + 1) * mesh`, and leaves lying exactly on a level.
    /// Two net points are adjacent when no third net point lies between them:
    /// a point and its ancestor one level down, or two points of the same
    /// level whose common ancestor sits strictly between the levels.
    pub fn i2_length(&self, mesh: f64) -> Result<f64> {
        if !(mesh > 0.0) {
            return input(format!("mesh must be positive, got {mesh}"));
        }
        let reach = self.subtree_heights();
        let depth = self.depths();
        let on_level = |h: f64| {
            let k = (h / mesh).round();
            k >= 1.0 && (h - k * mesh).abs() <= 1e-9 * mesh.max(h)
        };
        let top = self.height();
        let mut total = 0.0;
        let mut k = 1usize;
        while (k as f64) * mesh <= top * (1.0 + 1e-12) {
            let level = k as f64 * mesh;
            let members: Vec<TreePoint> = self
                .level_set(level)
                .into_iter()
                .filter(|p| {
                    let n = &self.nodes[p.node];
                    reach[p.node] >= level + mesh || (n.children.is_empty() && on_level(n.death) && (n.death - level).abs() <= 1e-9 * mesh.max(level))
                })
                .collect();
            total += members.len() as f64 * mesh * mesh;
            // Group consecutive members sharing the ancestor one level down.
            let below = level - mesh;
            let mut i = 0;
            while i < members.len() {
                let anc = self.ancestor_node_at(members[i].node, below);
                let mut j = i + 1;
                while j < members.len() && self.ancestor_node_at(members[j].node, below) == anc {
                    j += 1;
                }
                for x in i..j {
                    for y in x + 1..j {
                        let tau = self.mrca_height(members[x], members[y], &depth);
                        if tau > below + 1e-12 * mesh {
                            let d = 2.0 * (level - tau);
                            total += d * d;
                        }
                    }
                }
                i = j;
            }
            k += 1;
        }
        Ok(total)
    }

    /// The node on the lineage of `v` that contains height `h`.
    fn ancestor_node_at(&self, mut v: usize, h: f64) -> usize {
        while self.nodes[v].birth >= h {
            match self.nodes[v].parent {
                Some(p) => v = p,
                None => break,
            }
        }
        v
    }

    /// Serializes to the line format `node_id parent_id birth death child_ids...`
    /// under a `roots=... height_cap=...` header. Floats use shortest
    /// round-trip decimal form, so parsing restores the exact values.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let roots: Vec<String> = self.roots.iter().map(|r| r.to_string()).collect();
        let cap = self.height_cap.map_or("none".to_string(), fmt_f64);
        let _ = writeln!(s, "roots={} height_cap={}", roots.join(","), cap);
        for (i, n) in self.nodes.iter().enumerate() {
            let parent = n.parent.map_or("-".to_string(), |p| p.to_string());
            let _ = write!(s, "{i} {parent} {} {}", fmt_f64(n.birth), fmt_f64(n.death));
            for c in &n.children {
                let _ = write!(s, " {c}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<FamilyForest> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty forest file".into() })?;
        let mut roots = Vec::new();
        let mut cap = None;
        for tok in header.split_whitespace() {
            if let Some(r) = tok.strip_prefix("roots=") {
                for x in r.split(',').filter(|x| !x.is_empty()) {
                    roots.push(parse_usize(x, 1)?);
                }
            } else if let Some(c) = tok.strip_prefix("height_cap=") {
                cap = if c == "none" { None } else { Some(parse_f64(c, 1)?) };
            } else {
                return Err(Error::Parse { line: 1, msg: format!("unknown header field {tok}") });
            }
        }
        let mut nodes: Vec<Node> = Vec::new();
        for (ln, line) in lines {
            let ln = ln + 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 4 {
                return Err(Error::Parse { line: ln, msg: "expected node_id parent_id birth death".into() });
            }
            let id = parse_usize(toks[0], ln)?;
            if id != nodes.len() {
                return Err(Error::Parse { line: ln, msg: format!("node ids must be consecutive, got {id}") });
            }
            let parent = if toks[1] == "-" { None } else { Some(parse_usize(toks[1], ln)?) };
            let children = toks[4..].iter().map(|t| parse_usize(t, ln)).collect::<Result<Vec<_>>>()?;
            nodes.push(Node { parent, birth: parse_f64(toks[2], ln)?, death: parse_f64(toks[3], ln)?, children, label: Vec::new() });
        }
        let n = nodes.len();
        if roots.iter().chain(nodes.iter().flat_map(|x| x.children.iter())).any(|&c| c >= n)
            || nodes.iter().any(|x| x.parent.is_some_and(|p| p >= n))
        {
            return Err(Error::Parse { line: 0, msg: "node reference out of range".into() });
        }
        let mut f = FamilyForest { nodes, roots, height_cap: cap };
        f.validate()?;
        f.relabel();
        Ok(f)
    }
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse { line, msg: format!("bad integer {s:?}") })
}

pub(crate) fn parse_f64(s: &str, line: usize) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        _ => s.parse().map_err(|_| Error::Parse { line, msg: format!("bad number {s:?}") }),
    }
}

pub(crate) fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else {
        format!("{x:?}")
    }
}

/// Least distortion over correspondences between two finite point sets that
/// contain the root pair. Every correspondence contains the union of the
/// graphs of a map `A -> B` and a map `B -> A`, and shrinking a relation never
/// raises its distortion, so it suffices to enumerate such pairs of maps.
fn min_root_distortion(fa: &FamilyForest, pa: &[TreePoint], fb: &FamilyForest, pb: &[TreePoint]) -> f64 {
    let dist = |f: &FamilyForest, p: &[TreePoint]| -> Vec<Vec<f64>> {
        let depth = f.depths();
        p.iter()
            .map(|&x| p.iter().map(|&y| f.point_height(x) + f.point_height(y) - 2.0 * f.mrca_height(x, y, &depth)).collect())
            .collect()
    };
    let (da, db) = (dist(fa, pa), dist(fb, pb));
    let (na, nb) = (pa.len(), pb.len());
    let mut best = f64::INFINITY;
    let mut phi = vec![0usize; na];
    loop {
        // phi[0] = 0 pins the root pair; enumerate psi likewise.
        let mut psi = vec![0usize; nb];
        loop {
            let mut pairs: Vec<(usize, usize)> = (0..na).map(|i| (i, phi[i])).collect();
            pairs.extend((0..nb).map(|j| (psi[j], j)));
            let mut dis = 0.0f64;
            for (x, &(i, j)) in pairs.iter().enumerate() {
                for &(k, l) in &pairs[x + 1..] {
                    dis = dis.max((da[i][k] - db[j][l]).abs());
                }
                if dis >= best {
                    break;
                }
            }
            best = best.min(dis);
            if !advance(&mut psi, na) {
                break;
            }
        }
        if !advance(&mut phi, nb) {
            break;
        }
    }
    best
}

/// Odometer over maps with the first coordinate fixed at 0.
fn advance(map: &mut [usize], base: usize) -> bool {
    for slot in map.iter_mut().skip(1) {
        *slot += 1;
        if *slot < base {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Distortion of the correspondence induced by running both contours on a
/// common time scale. When both contours have the same number of breakpoints
/// the correspondence maps matched edges linearly onto each other and the
/// distortion is attained at breakpoints. Otherwise the breakpoint maximum is
/// inflated by four times the largest height change on a common cell, which
/// bounds the contribution of points between knots.
pub(crate) fn contour_correspondence_distortion(a: &Excursion, b: &Excursion) -> f64 {
    let (pa, pb) = (&a.points, &b.points);
    if pa.len() < 2 || pb.len() < 2 {
        return 0.0;
    }
    let (ua, ub) = (pa.last().unwrap().0, pb.last().unwrap().0);
    let (ka, kb): (Vec<f64>, Vec<f64>);
    let mut slack = 0.0;
    if pa.len() == pb.len() && same_pattern(pa, pb) {
        ka = pa.iter().map(|p| p.1).collect();
        kb = pb.iter().map(|p| p.1).collect();
    } else {
        let mut knots: Vec<f64> = pa.iter().map(|p| p.0 / ua).chain(pb.iter().map(|p| p.0 / ub)).collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        // Refine so that the distortion between knots stays small.
        let ha = pa.iter().map(|p| p.1).fold(0.0, f64::max);
        let hb = pb.iter().map(|p| p.1).fold(0.0, f64::max);
        let budget = 2000usize;
        let target = (ha.max(hb) * 2.0 * ua.max(ub) / budget as f64).max(1e-12);
        let mut refined = vec![knots[0]];
        for w in knots.windows(2) {
            let slope = 2.0 * ua.max(ub) * (w[1] - w[0]);
            let m = ((slope / target).ceil() as usize).clamp(1, 64);
            for s in 1..=m {
                refined.push(w[0] + (w[1] - w[0]) * s as f64 / m as f64);
            }
        }
        ka = refined.iter().map(|&s| a.eval(s * ua)).collect();
        kb = refined.iter().map(|&s| b.eval(s * ub)).collect();
        let osc = |k: &[f64]| k.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        slack = 4.0 * (osc(&ka) + osc(&kb));
    }
    if ka.len() > 6000 {
        // Quadratic scan too large; fall back to four times the sup-norm gap.
        let sup = ka.iter().zip(&kb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        return 4.0 * sup + slack;
    }
    let mut dis = 0.0f64;
    for i in 0..ka.len() {
        let (mut ma, mut mb) = (ka[i], kb[i]);
        for j in i + 1..ka.len() {
            ma = ma.min(ka[j]);
            mb = mb.min(kb[j]);
            let d1 = ka[i] + ka[j] - 2.0 * ma;
            let d2 = kb[i] + kb[j] - 2.0 * mb;
            dis = dis.max((d1 - d2).abs());
        }
    }
    dis + slack
}

fn same_pattern(pa: &[(f64, f64)], pb: &[(f64, f64)]) -> bool {
    pa.windows(2).zip(pb.windows(2)).all(|(x, y)| (x[1].1 > x[0].1) == (y[1].1 > y[0].1))
        && pa.iter().zip(pb).all(|(x, y)| (x.1 == 0.0) == (y.1 == 0.0))
}

/// Random binary forest with edge lengths `k / denom`, `k` in `1..=max_k`.
/// With a power-of-two `denom` all heights are exact in binary floating point.
pub fn random_dyadic_forest<R: Rng>(rng: &mut R, max_nodes: usize, denom: u32, max_k: u32) -> FamilyForest {
    let mut f = FamilyForest::new();
    let roots = rng.random_range(1..=3);
    let mut frontier = Vec::new();
    for _ in 0..roots {
        let h = rng.random_range(1..=max_k) as f64 / denom as f64;
        frontier.push(f.push_root(h));
    }
    while let Some(v) = frontier.pop() {
        if f.len() + 2 > max_nodes || rng.random_bool(0.45) {
            continue;
        }
        for _ in 0..2 {
            let h = f.nodes[v].death + rng.random_range(1..=max_k) as f64 / denom as f64;
            frontier.push(f.push_child(v, h));
        }
    }
    f
}

/// Groups level-set points by tree index (position of the root in `roots`).
pub fn tree_index_of_points(f: &FamilyForest, pts: &[TreePoint]) -> Vec<usize> {
    let root_pos: HashMap<usize, usize> = f.roots.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    pts.iter()
        .map(|p| {
            let mut v = p.node;
            while let Some(q) = f.nodes[v].parent {
                v = q;
            }
            root_pos[&v]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn three_leaf() -> FamilyForest {
        // Root to 0.5, then left leaf edge to 1 and right subtree splitting at 0.8.
        let mut f = FamilyForest::new();
        let r = f.push_root(0.5);
        let a = f.push_child(r, 0.8);
        f.push_child(r, 1.0);
        f.push_child(a, 1.0);
        f.push_child(a, 1.0);
        f
    }

    fn leaf_points(f: &FamilyForest) -> Vec<TreePoint> {
        f.preorder()
            .into_iter()
            .filter(|&v| f.nodes[v].children.is_empty())
            .map(|v| TreePoint { node: v, offset: f.nodes[v].length() })
            .collect()
    }

    #[test]
    fn distance_examples() {
        let f = FamilyForest::cherry(0.3, 1.0);
        let l = leaf_points(&f);
        assert!((f.genealogical_distance(l[0], l[1]).unwrap() - 1.4).abs() < 1e-12);
        assert_eq!(f.genealogical_distance(l[0], l[0]).unwrap(), 0.0);

        let f = three_leaf();
        let l = leaf_points(&f);
        // Preorder leaves: the two under the 0.8 split, then the lone leaf.
        assert!((f.genealogical_distance(l[0], l[1]).unwrap() - 0.4).abs() < 1e-12);
        assert!((f.genealogical_distance(l[0], l[2]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distinct_trees_and_roots() {
        let mut f = FamilyForest::new();
        f.push_root(1.0);
        f.push_root(1.0);
        let a = TreePoint { node: 0, offset: 1.0 };
        let b = TreePoint { node: 1, offset: 0.5 };
        assert_eq!(f.genealogical_distance(a, b).unwrap(), 1.5);
        let (ra, rb) = (TreePoint { node: 0, offset: 0.0 }, TreePoint { node: 1, offset: 0.0 });
        assert_eq!(f.genealogical_distance(ra, rb).unwrap(), 0.0);
        assert!(f.genealogical_distance(TreePoint { node: 7, offset: 0.0 }, a).is_err());
        assert!(f.genealogical_distance(TreePoint { node: 0, offset: 2.0 }, a).is_err());
    }

    #[test]
    fn truncation_examples() {
        let f = FamilyForest::single_edge(2.0);
        let g = f.truncate(1.0);
        assert_eq!(g.nodes[0].death, 1.0);
        assert_eq!(g.height_cap, Some(1.0));
        let c = FamilyForest::cherry(0.5, 1.0);
        assert!(c.truncate(3.0).ordered_isometric(&c));
        let roots = c.truncate(0.0);
        assert_eq!(roots.len(), 1);
        assert_eq!(roots.nodes[0].death, 0.0);
    }

    #[test]
    fn level_set_examples() {
        let c = FamilyForest::cherry(0.5, 1.0);
        assert_eq!(c.level_set(0.0).len(), 1);
        assert_eq!(c.level_set(0.75).len(), 2);
        assert_eq!(c.level_set(0.5).len(), 1);
        assert_eq!(FamilyForest::single_edge(2.0).level_set(1.0).len(), 1);
    }

    #[test]
    fn trim_examples() {
        let c = FamilyForest::cherry(0.5, 1.0);
        let t = c.trim(0.7).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t.nodes[0].death - 0.3).abs() < 1e-12);
        let e = FamilyForest::single_edge(2.0).trim(1.0).unwrap();
        assert_eq!(e.nodes[0].death, 1.0);
        let r = c.trim(5.0).unwrap();
        assert_eq!((r.len(), r.nodes[0].death), (1, 0.0));
        assert!(c.trim(0.0).is_err());
    }

    #[test]
    fn ancestor_examples() {
        let c = FamilyForest::cherry(0.5, 1.0);
        assert_eq!(c.ancestors(1.0, 0.3).unwrap().len(), 2);
        assert_eq!(c.ancestors(1.0, 0.7).unwrap().len(), 1);
        assert_eq!(c.ancestors(1.0, 1.0).unwrap().len(), 1);
        assert!(c.ancestors(1.5, 0.2).unwrap().is_empty());
        assert!(c.ancestors(1.0, 1.5).is_err());
    }

    #[test]
    fn gh_examples() {
        let c = FamilyForest::cherry(0.5, 1.0);
        assert_eq!(c.gh_distance_bounds(&c), (0.0, 0.0));
        let (lo, hi) = FamilyForest::single_edge(1.0).gh_distance_bounds(&FamilyForest::single_edge(1.75));
        assert!((lo - 0.375).abs() < 1e-12 && (hi - 0.375).abs() < 1e-12, "{lo} {hi}");
        let f = three_leaf();
        let (lo, hi) = f.gh_distance_bounds(&f.truncate(0.9));
        assert!(lo <= hi && hi <= 0.1 + 1e-12, "{lo} {hi}");
    }

    #[test]
    fn i2_single_edge() {
        let h = 1.5;
        for m in [1usize, 4, 16, 64] {
            let v = FamilyForest::single_edge(h).i2_length(h / m as f64).unwrap();
            assert!((v - h * h / m as f64).abs() < 1e-9, "m={m} v={v}");
        }
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_dyadic_forest(&mut rng, 40, 16, 20);
        assert_eq!(FamilyForest::from_text(&f.to_text()).unwrap(), f);
        // Non-dyadic values must survive the decimal form bit for bit.
        let f = FamilyForest::cherry(0.1 + 0.2, 2.0 / 3.0);
        assert_eq!(FamilyForest::from_text(&f.to_text()).unwrap(), f);
        let mut open = FamilyForest::single_edge(ALIVE);
        open.height_cap = None;
        assert_eq!(FamilyForest::from_text(&open.to_text()).unwrap(), open);
        assert!(FamilyForest::from_text("roots=0 height_cap=none\n0 - 0 x\n").is_err());
    }

    proptest! {
        #[test]
        fn metric_properties(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_dyadic_forest(&mut rng, 30, 8, 12);
            let depth = f.depths();
            let h = f.height();
            let t = rng.random_range(0.0..h);
            let lv = f.level_set(t);
            let d = |a: TreePoint, b: TreePoint| f.point_height(a) + f.point_height(b) - 2.0 * f.mrca_height(a, b, &depth);
            for &x in &lv { for &y in &lv { for &z in &lv {
                prop_assert!(d(x, z) <= d(x, y).max(d(y, z)) + 1e-12);
            }}}
            // Four-point condition on random points.
            let pick = |rng: &mut ChaCha8Rng| {
                let v = rng.random_range(0..f.len());
                TreePoint { node: v, offset: rng.random_range(0.0..=1.0) * f.nodes[v].length() }
            };
            let p: Vec<TreePoint> = (0..4).map(|_| pick(&mut rng)).collect();
            let s = [d(p[0], p[1]) + d(p[2], p[3]), d(p[0], p[2]) + d(p[1], p[3]), d(p[0], p[3]) + d(p[1], p[2])];
            let mut s2 = s; s2.sort_by(f64::total_cmp);
            prop_assert!(s2[2] - s2[1] <= 1e-9);
            prop_assert!(d(p[0], p[1]) >= 0.0 && (d(p[0], p[1]) - d(p[1], p[0])).abs() < 1e-12);
        }

        #[test]
        fn trim_semigroup_and_ancestor_monotonicity(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_dyadic_forest(&mut rng, 30, 8, 12);
            let (e1, e2) = (rng.random_range(1..6) as f64 / 8.0, rng.random_range(1..6) as f64 / 8.0);
            let lhs = f.trim(e1).unwrap().trim(e2).unwrap();
            let rhs = f.trim(e1 + e2).unwrap();
            prop_assert_eq!(lhs.signature(), rhs.signature());
            let t = f.height() * rng.random_range(0.2..1.0);
            let mut last = usize::MAX;
            for k in 1..=8 {
                let n = f.ancestors(t, t * k as f64 / 8.0).unwrap().len();
                prop_assert!(n <= last);
                last = n;
            }
        }

        #[test]
        fn gh_bounds_ordered(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_dyadic_forest(&mut rng, 9, 8, 12);
            let g = random_dyadic_forest(&mut rng, 9, 8, 12);
            let (lo, hi) = f.gh_distance_bounds(&g);
            prop_assert!(lo <= hi + 1e-12);
            let t = f.height() * 0.6;
            let (_, hi) = f.gh_distance_bounds(&f.truncate(t));
            prop_assert!(hi <= f.height() - t + 1e-9);
        }

        #[test]
        fn i2_refines_to_zero(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_dyadic_forest(&mut rng, 30, 8, 12);
            let coarse = f.i2_length(1.0 / 16.0).unwrap();
            let fine = f.i2_length(1.0 / 256.0).unwrap();
            prop_assert!(fine <= coarse + 1e-12);
            prop_assert!(fine < 0.1 * f.total_length().max(1.0));
        }
    }
}
