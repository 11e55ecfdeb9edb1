//! Exact event-driven simulation of the catalyst and the reactant.
//!
//! Each individual gives birth at rate `n * b * m` and dies at rate
//! `n * b * m`, where `m` is 1 for the catalyst and the current catalyst mass
//! for the reactant. Time is run on an operational clock `Λ(t) = n b ∫ m`, in
//! which every individual carries two unit-rate exponential clocks; the
//! catalyst path is piecewise constant, so `Λ` is piecewise linear and is
//! inverted exactly.
//!
//! Two recordings of the same law are provided:
//! - `GaltonWatson`: direct method. The next event fires after an `Exp(2N)`
//!   operational time at a uniformly chosen individual, which is replaced by
//!   0 or 2 children on a fair coin.
//! - `BirthDeath`: next-reaction method. Every lineage keeps its own death
//!   and birth thresholds; a birth ends the parent's edge with two children,
//!   the continuing parent and the newborn, in random order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::rng::{stream, stream_rng, SimRng};
use crate::rtree::{fmt_f64, parse_f64, FamilyForest, ALIVE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    GaltonWatson,
    BirthDeath,
}

impl std::str::FromStr for Representation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "galton_watson" => Ok(Self::GaltonWatson),
            "birth_death" => Ok(Self::BirthDeath),
            _ => input(format!("unknown representation {s:?} (expected galton_watson or birth_death)")),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub b1: f64,
    pub b2: f64,
    /// Rescaling index: particles carry mass `1/n`.
    pub n: u32,
    pub initial_catalyst_mass: f64,
    pub initial_reactant_mass: f64,
    /// Truncation threshold for the catalyst mass.
    pub delta: f64,
    pub t_max: f64,
    pub seed: u64,
    pub representation: Representation,
    /// Hard limit on the number of live individuals of one population.
    pub population_cap: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            b1: 1.0,
            b2: 1.0,
            n: 1,
            initial_catalyst_mass: 1.0,
            initial_reactant_mass: 1.0,
            delta: 0.0,
            t_max: 10.0,
            seed: 0,
            representation: Representation::GaltonWatson,
            population_cap: 10_000_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.b1 > 0.0 && self.b2 > 0.0) {
            return input("rates b1 and b2 must be positive");
        }
        if self.n == 0 {
            return input("rescaling index n must be at least 1");
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return input("t_max must be positive and finite");
        }
        if !(self.delta >= 0.0) {
            return input("delta must be nonnegative");
        }
        self.count_of(self.initial_catalyst_mass)?;
        self.count_of(self.initial_reactant_mass)?;
        Ok(())
    }

    /// Number of particles carrying `mass` at this scale.
    pub fn count_of(&self, mass: f64) -> Result<usize> {
        let k = mass * self.n as f64;
        if !(k >= 0.0) || (k - k.round()).abs() > 1e-9 * k.max(1.0) {
            return input(format!("mass {mass} is not a multiple of 1/{}", self.n));
        }
        Ok(k.round() as usize)
    }
}

/// Right-continuous step path of a total mass. `values[i]` holds on
/// `[times[i], times[i+1])`, the last value up to `horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct MassPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub horizon: f64,
    pub n: u32,
}

impl MassPath {
    pub fn constant(value: f64, horizon: f64) -> Self {
        MassPath { times: vec![0.0], values: vec![value], horizon, n: 1 }
    }

    pub fn from_steps(steps: &[(f64, f64)], horizon: f64, n: u32) -> Result<Self> {
        if steps.is_empty() || steps[0].0 != 0.0 {
            return input("a mass path must start at time 0");
        }
        if steps.windows(2).any(|w| !(w[1].0 > w[0].0)) || steps.iter().any(|s| !(s.1 >= 0.0)) {
            return input("mass path times must increase and values be nonnegative");
        }
        Ok(MassPath { times: steps.iter().map(|s| s.0).collect(), values: steps.iter().map(|s| s.1).collect(), horizon, n })
    }

    fn segment(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.values[self.segment(t)]
    }

    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    /// `∫_a^b` of the step path (exact).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut total = 0.0;
        let mut i = self.segment(a);
        let mut lo = a;
        while lo < b {
            let hi = self.times.get(i + 1).copied().unwrap_or(f64::INFINITY).min(b);
            total += self.values[i] * (hi - lo);
            lo = hi;
            i += 1;
        }
        total
    }

    /// First time the mass is at most `delta`; `+∞` if it never is.
    pub fn stopping_time(&self, delta: f64) -> f64 {
        self.times.iter().zip(&self.values).find(|(_, &v)| v <= delta).map_or(f64::INFINITY, |(&t, _)| t)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# n={} horizon={}", self.n, fmt_f64(self.horizon));
        s.push_str("t,value\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(s, "{},{}", fmt_f64(*t), fmt_f64(*v));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut n = 1;
        let mut horizon = f64::NAN;
        let mut steps = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(h) = line.strip_prefix('#') {
                for tok in h.split_whitespace() {
                    match tok.split_once('=') {
                        Some(("n", v)) => n = v.parse().map_err(|_| Error::Parse { line: i + 1, msg: "bad n".into() })?,
                        Some(("horizon", v)) => horizon = parse_f64(v, i + 1)?,
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() || line == "t,value" {
                continue;
            }
            let (t, v) = line.split_once(',').ok_or(Error::Parse { line: i + 1, msg: "expected `t,value`".into() })?;
            steps.push((parse_f64(t, i + 1)?, parse_f64(v, i + 1)?));
        }
        if horizon.is_nan() {
            horizon = steps.last().map_or(0.0, |s| s.0);
        }
        MassPath::from_steps(&steps, horizon, n)
    }
}

/// Free function form of [`MassPath::stopping_time`].
pub fn stopping_time(path: &MassPath, delta: f64) -> f64 {
    path.stopping_time(delta)
}

/// Piecewise-linear operational clock `Λ(t) = rate * ∫_0^t m(s) ds`.
struct Clock {
    times: Vec<f64>,
    slopes: Vec<f64>,
    cum: Vec<f64>,
    horizon: f64,
}

impl Clock {
    fn constant(rate: f64, horizon: f64) -> Self {
        Clock { times: vec![0.0], slopes: vec![rate], cum: vec![0.0], horizon }
    }

    fn from_path(path: &MassPath, rate: f64, horizon: f64) -> Self {
        let mut cum = vec![0.0];
        for i in 1..path.times.len() {
            let prev = cum[i - 1] + rate * path.values[i - 1] * (path.times[i] - path.times[i - 1]);
            cum.push(prev);
        }
        Clock { times: path.times.clone(), slopes: path.values.iter().map(|v| rate * v).collect(), cum, horizon }
    }

    /// Calendar time at which the clock reads `l`, or `None` past the horizon.
    fn time_at(&self, l: f64) -> Option<f64> {
        let i = self.cum.partition_point(|&c| c <= l).saturating_sub(1);
        let mut j = i;
        // Skip flat stretches that end exactly at `l`.
        while j + 1 < self.cum.len() && self.cum[j + 1] <= l {
            j += 1;
        }
        let slope = self.slopes[j];
        if slope <= 0.0 {
            return None;
        }
        let t = self.times[j] + (l - self.cum[j]) / slope;
        let next = self.times.get(j + 1).copied().unwrap_or(f64::INFINITY);
        (t <= self.horizon && t <= next).then_some(t)
    }
}

struct Recorder {
    forest: FamilyForest,
    times: Vec<f64>,
    values: Vec<f64>,
    n: f64,
    cap: usize,
}

impl Recorder {
    fn new(initial: usize, n: u32, cap: usize) -> Result<Self> {
        if initial > cap {
            return Err(Error::Overflow { cap, time: 0.0 });
        }
        let mut forest = FamilyForest::new();
        for _ in 0..initial {
            forest.push_root(ALIVE);
        }
        Ok(Recorder { forest, times: vec![0.0], values: vec![initial as f64 / n as f64], n: n as f64, cap })
    }

    fn record(&mut self, t: f64, alive: usize) -> Result<()> {
        if alive > self.cap {
            return Err(Error::Overflow { cap: self.cap, time: t });
        }
        self.times.push(t);
        self.values.push(alive as f64 / self.n);
        Ok(())
    }

    fn finish(mut self, cap: f64, horizon: f64, n: u32) -> (MassPath, FamilyForest) {
        for node in &mut self.forest.nodes {
            if node.death > cap {
                node.death = cap;
            }
        }
        self.forest.height_cap = Some(cap);
        (MassPath { times: self.times, values: self.values, horizon, n }, self.forest)
    }
}

fn exp1(rng: &mut SimRng) -> f64 {
    Exp1.sample(rng)
}

/// Direct method: one event per `Exp(2N)` operational time.
fn grow_galton_watson(rec: &mut Recorder, clock: &Clock, rng: &mut SimRng) -> Result<()> {
    let mut alive: Vec<usize> = rec.forest.roots.clone();
    let mut l = 0.0;
    while !alive.is_empty() {
        l += exp1(rng) / (2.0 * alive.len() as f64);
        let Some(t) = clock.time_at(l) else { break };
        let idx = rng.random_range(0..alive.len());
        let v = alive.swap_remove(idx);
        rec.forest.nodes[v].death = t;
        if rng.random_bool(0.5) {
            alive.push(rec.forest.push_child(v, ALIVE));
            alive.push(rec.forest.push_child(v, ALIVE));
        }
        rec.record(t, alive.len())?;
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Death,
    Birth,
}

/// Next-reaction method over lineages with separate birth and death clocks.
fn grow_birth_death(rec: &mut Recorder, clock: &Clock, rng: &mut SimRng) -> Result<()> {
    // Lineage state: current node, or None once dead.
    let mut lineages: Vec<Option<usize>> = Vec::new();
    // Thresholds are positive, so their bit patterns order like the values.
    let mut queue: BinaryHeap<Reverse<(u64, Kind, usize)>> = BinaryHeap::new();
    let key = |x: f64| x.to_bits();
    for &r in &rec.forest.roots.clone() {
        let id = lineages.len();
        lineages.push(Some(r));
        queue.push(Reverse((key(exp1(rng)), Kind::Death, id)));
        queue.push(Reverse((key(exp1(rng)), Kind::Birth, id)));
    }
    let mut alive = lineages.len();
    while let Some(Reverse((bits, kind, id))) = queue.pop() {
        let Some(v) = lineages[id] else { continue };
        let l = f64::from_bits(bits);
        let Some(t) = clock.time_at(l) else { break };
        rec.forest.nodes[v].death = t;
        match kind {
            Kind::Death => {
                lineages[id] = None;
                alive -= 1;
            }
            Kind::Birth => {
                let newborn_first = rng.random_bool(0.5);
                let (first, second) = (rec.forest.push_child(v, ALIVE), rec.forest.push_child(v, ALIVE));
                let (cont, newborn) = if newborn_first { (second, first) } else { (first, second) };
                lineages[id] = Some(cont);
                queue.push(Reverse((key(l + exp1(rng)), Kind::Birth, id)));
                let nid = lineages.len();
                lineages.push(Some(newborn));
                queue.push(Reverse((key(l + exp1(rng)), Kind::Death, nid)));
                queue.push(Reverse((key(l + exp1(rng)), Kind::Birth, nid)));
                alive += 1;
            }
        }
        rec.record(t, alive)?;
    }
    Ok(())
}

fn grow(
    initial: usize,
    clock: &Clock,
    cfg: &SimConfig,
    cut: f64,
    rng: &mut SimRng,
) -> Result<(MassPath, FamilyForest)> {
    let mut rec = Recorder::new(initial, cfg.n, cfg.population_cap)?;
    match cfg.representation {
        Representation::GaltonWatson => grow_galton_watson(&mut rec, clock, rng)?,
        Representation::BirthDeath => grow_birth_death(&mut rec, clock, rng)?,
    }
    Ok(rec.finish(cut, cfg.t_max, cfg.n))
}

/// Catalyst population up to `t_max`, with its forest capped at `t_max`.
pub fn simulate_catalyst(cfg: &SimConfig) -> Result<(MassPath, FamilyForest)> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, stream::CATALYST);
    let clock = Clock::constant(cfg.n as f64 * cfg.b1, cfg.t_max);
    grow(cfg.count_of(cfg.initial_catalyst_mass)?, &clock, cfg, cfg.t_max, &mut rng)
}

/// Reactant population given a catalyst mass path. The forest is cut at the
/// catalyst's extinction time (or `t_max`); after extinction the reactant
/// no longer branches, so its mass path stays constant.
pub fn simulate_reactant_quenched(cfg: &SimConfig, catalyst: &MassPath) -> Result<(MassPath, FamilyForest)> {
    cfg.validate()?;
    if catalyst.horizon < cfg.t_max {
        return input(format!("catalyst path covers [0, {}] but t_max is {}", catalyst.horizon, cfg.t_max));
    }
    let mut rng = stream_rng(cfg.seed, stream::REACTANT);
    let clock = Clock::from_path(catalyst, cfg.n as f64 * cfg.b2, cfg.t_max);
    let cut = catalyst.stopping_time(0.0).min(cfg.t_max);
    grow(cfg.count_of(cfg.initial_reactant_mass)?, &clock, cfg, cut, &mut rng)
}

/// Output of [`simulate_joint`].
#[derive(Clone, Debug)]
pub struct JointRun {
    pub catalyst: (MassPath, FamilyForest),
    pub reactant: (MassPath, FamilyForest),
}

/// Catalyst, then the reactant quenched on it. The catalyst uses the same
/// stream as [`simulate_catalyst`], so both agree for a given seed.
pub fn simulate_joint(cfg: &SimConfig) -> Result<JointRun> {
    let catalyst = simulate_catalyst(cfg)?;
    let reactant = simulate_reactant_quenched(cfg, &catalyst.0)?;
    Ok(JointRun { catalyst, reactant })
}
