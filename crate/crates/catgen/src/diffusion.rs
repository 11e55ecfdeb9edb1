//! Diffusion limits on a uniform grid.
//!
//! Under the crate's rate convention the total masses converge to
//! `dX = sqrt(2 b1 X) dW^X`, `dY = sqrt(2 b2 X Y) dW^Y`. The limit contour
//! `ζ` has generator `(f'/(b2 X))'` and quadratic variation
//! `d<ζ> = 2/(b2 X(ζ)) du`; it is built from `B = s(ζ)`, a martingale with
//! `d<B> = 2 X(s⁻¹(B))/b2 du`, reflected at 0 and at `s(τ^δ)`.
//!
//! Mass-unit local time of the contour at level `h` is
//! `ℓ^h = b2 X_h L^h / 2`, where `L^h` is the semimartingale local time of
//! `ζ`. With this normalization `h ↦ ℓ^h` is the reactant mass `Y`, and at the
//! root `ℓ^0 = b2 R` where `R` is the lower regulator of `B`.

use std::fmt::Write as _;
use std::io::{Read, Write};

use rand_distr::{Distribution, Exp1, Open01, StandardNormal};

use crate::contour::Excursion;
use crate::error::{input, Error, Result};
use crate::particle::{MassPath, SimConfig};
use crate::rng::{stream, stream_rng, SimRng};
use crate::rtree::{fmt_f64, parse_f64};

/// Path sampled on the grid `k * dt`. After absorption the values stay at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionPath {
    pub dt: f64,
    pub values: Vec<f64>,
    pub absorbed_at: Option<usize>,
    /// Model quadratic variation of each step, when known. Used in place of
    /// squared increments by the local-time and depth estimators.
    pub qv_increments: Option<Vec<f64>>,
}

impl DiffusionPath {
    pub fn constant(value: f64, dt: f64, horizon: f64) -> Self {
        let steps = (horizon / dt).round() as usize;
        DiffusionPath { dt, values: vec![value; steps + 1], absorbed_at: None, qv_increments: None }
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.values.len().saturating_sub(1) as f64
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }

    pub fn absorption_time(&self) -> Option<f64> {
        self.absorbed_at.map(|k| k as f64 * self.dt)
    }

    /// First grid time with value `<= level`.
    pub fn first_at_or_below(&self, level: f64) -> Option<f64> {
        self.values.iter().position(|&v| v <= level).map(|k| k as f64 * self.dt)
    }

    /// The grid points as excursion breakpoints; a final return to 0 is
    /// appended one step later if the path ends above 0.
    pub fn to_excursion(&self) -> Result<Excursion> {
        let mut points: Vec<(f64, f64)> = self.values.iter().enumerate().map(|(k, &v)| (k as f64 * self.dt, v)).collect();
        if points.last().is_some_and(|p| p.1 != 0.0) {
            points.push((self.values.len() as f64 * self.dt, 0.0));
        }
        Excursion::new(points)
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let x = (t / self.dt).max(0.0);
        let k = x.floor() as usize;
        if k + 1 >= self.values.len() {
            return self.last();
        }
        let w = x - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// `∫_a^b` of the linear interpolant, clamped to the sampled range.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let h = self.horizon();
        let (a, b) = (a.clamp(0.0, h), b.clamp(0.0, h));
        if b <= a {
            return 0.0;
        }
        let (ka, kb) = ((a / self.dt).floor() as usize, (b / self.dt).floor() as usize);
        if ka == kb {
            return 0.5 * (self.value_at(a) + self.value_at(b)) * (b - a);
        }
        let mut total = 0.5 * (self.value_at(a) + self.values[ka + 1]) * ((ka + 1) as f64 * self.dt - a);
        for k in ka + 1..kb {
            total += 0.5 * (self.values[k] + self.values[k + 1]) * self.dt;
        }
        total + 0.5 * (self.values[kb] + self.value_at(b)) * (b - kb as f64 * self.dt)
    }

    pub fn to_csv(&self, seed: u64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# dt={} seed={} horizon={}", fmt_f64(self.dt), seed, fmt_f64(self.horizon()));
        s.push_str("t,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{},{}", fmt_f64(k as f64 * self.dt), fmt_f64(*v));
        }
        s
    }

    /// Parses [`to_csv`](Self::to_csv) output; returns the path and its seed.
    pub fn from_csv(text: &str) -> Result<(Self, u64)> {
        let (mut dt, mut seed) = (f64::NAN, 0u64);
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(h) = line.strip_prefix('#') {
                for tok in h.split_whitespace() {
                    match tok.split_once('=') {
                        Some(("dt", v)) => dt = parse_f64(v, i + 1)?,
                        Some(("seed", v)) => {
                            seed = v.parse().map_err(|_| Error::Parse { line: i + 1, msg: "bad seed".into() })?
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() || line == "t,value" {
                continue;
            }
            let (_, v) = line.split_once(',').ok_or(Error::Parse { line: i + 1, msg: "expected `t,value`".into() })?;
            values.push(parse_f64(v, i + 1)?);
        }
        if !(dt > 0.0) || values.is_empty() {
            return input("path file needs a positive dt header and at least one value");
        }
        Ok((Self::with_absorption(dt, values), seed))
    }

    const MAGIC: &'static [u8; 8] = b"CATGENP1";

    /// Little-endian binary form: magic, dt, seed, horizon, count, values.
    pub fn write_binary<W: Write>(&self, mut w: W, seed: u64) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&seed.to_le_bytes())?;
        w.write_all(&self.horizon().to_le_bytes())?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<(Self, u64)> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return input("not a binary path file");
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let dt = f64::from_le_bytes(next(&mut r)?);
        let seed = u64::from_le_bytes(next(&mut r)?);
        let _horizon = f64::from_le_bytes(next(&mut r)?);
        let len = u64::from_le_bytes(next(&mut r)?) as usize;
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(f64::from_le_bytes(next(&mut r)?));
        }
        Ok((Self::with_absorption(dt, values), seed))
    }

    fn with_absorption(dt: f64, values: Vec<f64>) -> Self {
        let absorbed_at = values.iter().position(|&v| v == 0.0).filter(|&k| values[k..].iter().all(|&v| v == 0.0));
        DiffusionPath { dt, values, absorbed_at, qv_increments: None }
    }
}

/// Anything that can serve as a catalyst mass profile: evaluation and exact
/// or trapezoidal integration.
pub trait MassProfile {
    fn value_at(&self, t: f64) -> f64;
    fn integral(&self, a: f64, b: f64) -> f64;
}

impl MassProfile for MassPath {
    fn value_at(&self, t: f64) -> f64 {
        MassPath::value_at(self, t)
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        MassPath::integral(self, a, b)
    }
}

impl MassProfile for DiffusionPath {
    fn value_at(&self, t: f64) -> f64 {
        DiffusionPath::value_at(self, t)
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        DiffusionPath::integral(self, a, b)
    }
}

/// A constant profile.
#[derive(Clone, Copy, Debug)]
pub struct Constant(pub f64);

impl MassProfile for Constant {
    fn value_at(&self, _: f64) -> f64 {
        self.0
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        self.0 * (b - a).max(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct FellerConfig {
    pub b1: f64,
    pub b2: f64,
    pub x0: f64,
    pub y0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Hold `X` at this value instead of integrating it.
    pub frozen_x: Option<f64>,
}

impl Default for FellerConfig {
    fn default() -> Self {
        FellerConfig { b1: 1.0, b2: 1.0, x0: 1.0, y0: 1.0, dt: 1e-4, horizon: 10.0, seed: 0, frozen_x: None }
    }
}

impl FellerConfig {
    fn validate(&self) -> Result<()> {
        if !(self.b1 > 0.0 && self.b2 > 0.0 && self.dt > 0.0 && self.horizon > 0.0) {
            return input("b1, b2, dt and horizon must be positive");
        }
        if !(self.x0 >= 0.0 && self.y0 >= 0.0) {
            return input("initial masses must be nonnegative");
        }
        Ok(())
    }
}

/// One full-truncation Euler step of the pair. Keeps its own noise streams
/// so that path recording and the fast race share exactly the same draws.
pub struct FellerStepper {
    pub x: f64,
    pub y: f64,
    sx: f64,
    sy: f64,
    frozen: bool,
    rx: SimRng,
    ry: SimRng,
}

impl FellerStepper {
    pub fn new(cfg: &FellerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(FellerStepper {
            x: cfg.frozen_x.unwrap_or(cfg.x0),
            y: cfg.y0,
            sx: (2.0 * cfg.b1 * cfg.dt).sqrt(),
            sy: (2.0 * cfg.b2 * cfg.dt).sqrt(),
            frozen: cfg.frozen_x.is_some(),
            rx: stream_rng(cfg.seed, stream::FELLER_X),
            ry: stream_rng(cfg.seed, stream::FELLER_Y),
        })
    }

    #[inline]
    pub fn step(&mut self) {
        let x = self.x;
        if !self.frozen && x > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rx);
            self.x = (x + self.sx * x.sqrt() * z).max(0.0);
        }
        // Y uses the catalyst at the left end of the step and stops moving
        // once the catalyst is gone.
        if self.y > 0.0 && x > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.ry);
            self.y = (self.y + self.sy * (x * self.y).sqrt() * z).max(0.0);
        }
    }
}

/// Sampled `(X, Y)` on `[0, horizon]`.
pub fn integrate_catalytic_feller(cfg: &FellerConfig) -> Result<(DiffusionPath, DiffusionPath)> {
    let mut st = FellerStepper::new(cfg)?;
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let mut xs = Vec::with_capacity(steps + 1);
    let mut ys = Vec::with_capacity(steps + 1);
    xs.push(st.x);
    ys.push(st.y);
    for _ in 0..steps {
        st.step();
        xs.push(st.x);
        ys.push(st.y);
    }
    let absorbed = |v: &[f64]| v.iter().position(|&x| x == 0.0);
    let (ax, ay) = (absorbed(&xs), absorbed(&ys));
    let x = DiffusionPath { dt: cfg.dt, values: xs, absorbed_at: ax, qv_increments: None };
    let y = DiffusionPath { dt: cfg.dt, values: ys, absorbed_at: ay, qv_increments: None };
    Ok((x, y))
}

/// Which population hit zero first in [`race`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RaceOutcome {
    /// `ρ⁰ < τ⁰`: the reactant died while the catalyst was alive.
    ReactantFirst,
    /// `τ⁰ ≤ ρ⁰`: the catalyst died first (the reactant then freezes).
    CatalystFirst,
    /// Both alive at the horizon.
    Unresolved,
}

/// Runs the Euler scheme until one of the masses is absorbed, without
/// storing the path. Same draws as [`integrate_catalytic_feller`].
pub fn race(cfg: &FellerConfig) -> Result<(RaceOutcome, f64)> {
    let mut st = FellerStepper::new(cfg)?;
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    for k in 1..=steps {
        st.step();
        if st.y == 0.0 {
            return Ok((RaceOutcome::ReactantFirst, k as f64 * cfg.dt));
        }
        if st.x == 0.0 {
            return Ok((RaceOutcome::CatalystFirst, k as f64 * cfg.dt));
        }
    }
    Ok((RaceOutcome::Unresolved, cfg.horizon))
}

/// `s(x) = ∫_0^x X` on the grid of `X`, restricted to `[0, τ^δ]` (or the
/// whole path when `X` stays above `δ`). Between grid points `X` is linear,
/// so `s` is piecewise quadratic and is inverted exactly.
#[derive(Clone, Debug)]
pub struct ScaleFunction {
    pub dt: f64,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
}

impl ScaleFunction {
    /// Upper end of the domain (`τ^δ` or the path horizon).
    pub fn top(&self) -> f64 {
        self.dt * (self.x.len() - 1) as f64
    }

    pub fn top_value(&self) -> f64 {
        *self.s.last().unwrap()
    }

    /// `X` at height `h` (linear interpolation).
    pub fn speed(&self, h: f64) -> f64 {
        let (k, w) = self.locate(h);
        self.x[k] + (self.x[(k + 1).min(self.x.len() - 1)] - self.x[k]) * w
    }

    fn locate(&self, h: f64) -> (usize, f64) {
        let r = (h / self.dt).clamp(0.0, (self.x.len() - 1) as f64);
        let k = (r.floor() as usize).min(self.x.len().saturating_sub(2));
        (k, r - k as f64)
    }

    pub fn eval(&self, h: f64) -> f64 {
        let (k, w) = self.locate(h);
        if self.x.len() == 1 {
            return 0.0;
        }
        let d = w * self.dt;
        let slope = (self.x[k + 1] - self.x[k]) / self.dt;
        self.s[k] + self.x[k] * d + 0.5 * slope * d * d
    }

    /// `s⁻¹(b)`, clamped to the domain.
    pub fn inverse(&self, b: f64) -> f64 {
        let k = self.s.partition_point(|&v| v <= b).saturating_sub(1);
        self.inverse_in(b, k.min(self.s.len().saturating_sub(2)))
    }

    /// Inverse within grid cell `k`.
    fn inverse_in(&self, b: f64, k: usize) -> f64 {
        if self.x.len() == 1 {
            return 0.0;
        }
        let r = (b - self.s[k]).max(0.0);
        let (x0, slope) = (self.x[k], (self.x[k + 1] - self.x[k]) / self.dt);
        // Solve x0 d + slope d²/2 = r in the stable form.
        let d = 2.0 * r / (x0 + (x0 * x0 + 2.0 * slope * r).max(0.0).sqrt());
        (k as f64 * self.dt + d.min(self.dt)).min(self.top())
    }
}

/// Builds the scale function of `x` up to its first grid entrance into
/// `[0, δ]`. Refuses `δ <= 0` (no limit contour exists when the catalyst
/// may reach zero) and paths starting at or below `δ`.
pub fn scale_function(x: &DiffusionPath, delta: f64) -> Result<ScaleFunction> {
    if !(delta > 0.0) {
        return input("the limit contour needs a truncation level delta > 0");
    }
    if x.values.first().is_none_or(|&v| v <= delta) {
        return input(format!("X must start above delta = {delta}"));
    }
    let end = x.values.iter().position(|&v| v <= delta).unwrap_or(x.values.len() - 1);
    let xs = x.values[..=end].to_vec();
    let mut s = Vec::with_capacity(xs.len());
    s.push(0.0);
    for k in 0..end {
        s.push(s[k] + 0.5 * (xs[k] + xs[k + 1]) * x.dt);
    }
    Ok(ScaleFunction { dt: x.dt, x: xs, s })
}

#[derive(Clone, Debug)]
pub struct ContourConfig {
    pub b2: f64,
    pub delta: f64,
    /// Local-time budget at the root, in mass units (the initial reactant mass).
    pub y0: f64,
    /// Contour time step.
    pub dt: f64,
    pub seed: u64,
    pub max_steps: usize,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig { b2: 1.0, delta: 0.1, y0: 1.0, dt: 1e-5, seed: 0, max_steps: 50_000_000 }
    }
}

/// Output of [`simulate_limit_contour`].
#[derive(Clone, Debug)]
pub struct LimitContour {
    /// `ζ^δ` on the contour-time grid, with model QV increments attached.
    pub zeta: DiffusionPath,
    /// `B = s(ζ^δ)`.
    pub b: DiffusionPath,
    /// Mass-unit local time accumulated at the root.
    pub root_local_time: f64,
    /// Upper reflecting boundary `τ^δ` (or the catalyst horizon).
    pub top: f64,
}

/// Limit contour of the reactant given the catalyst path `x`.
///
/// `B` is advanced by Gaussian steps with variance `2 X(ζ) dt / b2` and
/// reflected at both ends by Skorokhod regulators; each regulator increment
/// is the overshoot of the step's Brownian-bridge extremum, which is sampled
/// exactly. The run stops once `b2 · R_lower` reaches `y0`.
pub fn simulate_limit_contour(x: &DiffusionPath, cfg: &ContourConfig) -> Result<LimitContour> {
    let (mut zeta, mut bs, mut qv) = (vec![0.0], vec![0.0], Vec::new());
    let (root_local_time, top) = drive_contour(x, cfg, |z, b, q| {
        zeta.push(z);
        bs.push(b);
        qv.push(q);
    })?;
    let zeta = DiffusionPath { dt: cfg.dt, values: zeta, absorbed_at: None, qv_increments: Some(qv) };
    let b = DiffusionPath { dt: cfg.dt, values: bs, absorbed_at: None, qv_increments: None };
    Ok(LimitContour { zeta, b, root_local_time, top })
}

/// Streaming summary of a limit contour, for contours too long to store.
#[derive(Clone, Debug)]
pub struct ContourSummary {
    pub steps: usize,
    pub max_height: f64,
    /// Model quadratic variation accumulated at or below each requested level.
    pub qv_below: Vec<f64>,
    pub root_local_time: f64,
    pub top: f64,
}

/// Runs the same contour as [`simulate_limit_contour`] (same seed, same
/// path) without keeping it, recording only its height and the quadratic
/// variation below each of `levels`.
pub fn summarize_limit_contour(x: &DiffusionPath, cfg: &ContourConfig, levels: &[f64]) -> Result<ContourSummary> {
    let mut qv_below = vec![0.0; levels.len()];
    let (mut prev, mut max_height, mut steps) = (0.0, 0.0_f64, 0usize);
    let (root_local_time, top) = drive_contour(x, cfg, |z, _, q| {
        for (acc, &l) in qv_below.iter_mut().zip(levels) {
            if prev <= l {
                *acc += q;
            }
        }
        prev = z;
        max_height = max_height.max(z);
        steps += 1;
    })?;
    Ok(ContourSummary { steps, max_height, qv_below, root_local_time, top })
}

/// The contour loop. Calls `visit(ζ, B, Δ<ζ>)` after every step and
/// returns the root local time and the upper boundary.
fn drive_contour(x: &DiffusionPath, cfg: &ContourConfig, mut visit: impl FnMut(f64, f64, f64)) -> Result<(f64, f64)> {
    if !(cfg.b2 > 0.0 && cfg.dt > 0.0 && cfg.y0 > 0.0) {
        return input("b2, dt and the local-time budget must be positive");
    }
    let sf = scale_function(x, cfg.delta)?;
    let (top, top_b) = (sf.top(), sf.top_value());
    let mut rng = stream_rng(cfg.seed, stream::CONTOUR);
    let budget = cfg.y0 / cfg.b2;
    let var_scale = 2.0 * cfg.dt / cfg.b2;

    let mut b = 0.0_f64;
    let mut z_now = 0.0;
    let mut regulator = 0.0;
    let mut cell = 0usize;
    let mut steps = 0usize;
    while regulator < budget {
        if steps >= cfg.max_steps {
            return Err(Error::Overflow { cap: cfg.max_steps, time: steps as f64 * cfg.dt });
        }
        let speed = sf.speed(z_now);
        let v = var_scale * speed;
        let w = v.sqrt() * Distribution::<f64>::sample(&StandardNormal, &mut rng);
        let gap = (w * w - 2.0 * v * Distribution::<f64>::sample(&Open01, &mut rng).ln()).sqrt();
        let low = 0.5 * (w - gap);
        let mut push_up = (-(b + low)).max(0.0);
        let mut push_down = 0.0;
        if top_b.is_finite() {
            let gap = (w * w - 2.0 * v * Distribution::<f64>::sample(&Open01, &mut rng).ln()).sqrt();
            push_down = (b + 0.5 * (w + gap) - top_b).max(0.0);
        }
        if regulator + push_up > budget {
            // Stop exactly when the budget is exhausted.
            push_up = budget - regulator;
            push_down = 0.0;
        }
        regulator += push_up;
        b = (b + w + push_up - push_down).clamp(0.0, top_b);
        // Walk from the previous cell; steps are short.
        while cell + 1 < sf.s.len() - 1 && sf.s[cell + 1] <= b {
            cell += 1;
        }
        while cell > 0 && sf.s[cell] > b {
            cell -= 1;
        }
        z_now = sf.inverse_in(b, cell);
        steps += 1;
        visit(z_now, b, 2.0 * cfg.dt / (cfg.b2 * speed));
    }
    Ok((cfg.b2 * regulator, top))
}

/// Moves from height `h` in direction `dir` until `target` units of the
/// hazard `rate * ∫ catalyst` are used up or the boundary is reached.
/// Returns the new height and whether the hazard ran out.
fn travel(catalyst: &MassPath, rate: f64, h: f64, dir: f64, target: f64, top: f64) -> (f64, bool) {
    let times = &catalyst.times;
    let mut h = h;
    let mut left = target;
    let mut i = catalyst.times.partition_point(|&s| s <= h).saturating_sub(1);
    loop {
        // Segment of constant catalyst containing the direction of travel.
        if dir < 0.0 && i > 0 && times[i] >= h {
            i -= 1;
        }
        let (lo, hi) = (times[i], times.get(i + 1).copied().unwrap_or(f64::INFINITY));
        let end = if dir > 0.0 { hi.min(top) } else { lo.max(0.0) };
        let r = rate * catalyst.values[i];
        let span = (end - h).abs();
        if r > 0.0 && r * span >= left {
            return (h + dir * left / r, true);
        }
        left -= r * span;
        h = end;
        if (dir > 0.0 && h >= top) || (dir < 0.0 && h <= 0.0) {
            return (h, false);
        }
        if dir > 0.0 {
            i += 1;
        }
    }
}

/// Random-evolution contour of the reactant forest given the catalyst path.
///
/// The path moves at speed `2n` and reverses direction with hazard
/// `n b2 η(h)` per unit height, i.e. `2 n² b2 η(h)` per unit contour time,
/// in each direction. It is pushed down at `T^{δ,n} ∧ t_max` and starts a new
/// tree at 0 until `n · y0` trees are done. The law of the result equals the
/// law of the contour of the particle reactant forest truncated at that level.
pub fn simulate_random_evolution(cfg: &SimConfig, catalyst: &MassPath) -> Result<Excursion> {
    cfg.validate()?;
    let top = catalyst.stopping_time(cfg.delta).min(cfg.t_max);
    if catalyst.horizon < top {
        return input("catalyst path does not cover the contour's range");
    }
    let trees = cfg.count_of(cfg.initial_reactant_mass)?;
    let sigma = 2.0 * cfg.n as f64;
    let rate = cfg.n as f64 * cfg.b2;
    let mut rng = stream_rng(cfg.seed, stream::CONTOUR);
    let mut points = vec![(0.0, 0.0)];
    let mut u = 0.0;
    if top > 0.0 {
        for _ in 0..trees {
            let (mut h, mut dir) = (0.0, 1.0);
            loop {
                let e: f64 = Exp1.sample(&mut rng);
                let (next, flipped) = travel(catalyst, rate, h, dir, e, top);
                u += (next - h).abs() / sigma;
                h = next;
                points.push((u, h));
                if !flipped && dir < 0.0 {
                    break;
                }
                dir = -dir;
            }
        }
    }
    let mut e = Excursion { points: Vec::with_capacity(points.len()), speed: Some(sigma) };
    for p in points {
        if e.points.last().is_none_or(|q| q.0 < p.0) {
            e.points.push(p);
        }
    }
    Ok(e)
}

fn step_qv(path: &DiffusionPath, k: usize) -> f64 {
    match &path.qv_increments {
        Some(q) => q[k],
        None => (path.values[k + 1] - path.values[k]).powi(2),
    }
}

/// Band estimator `(1/2ε) Σ 1{|ζ_k − t| < ε} Δ<ζ>_k` of the local time at `t`.
/// At a reflecting boundary only half the band is visited, so the estimate
/// at the boundary level is half the right local time.
pub fn local_time_estimate(path: &DiffusionPath, t: f64, eps: f64) -> f64 {
    let n = path.values.len().saturating_sub(1);
    let sum: f64 = (0..n).filter(|&k| (path.values[k] - t).abs() < eps).map(|k| step_qv(path, k)).sum();
    sum / (2.0 * eps)
}

/// Discrete Tanaka estimate of the semimartingale (right) local time at `t`:
/// `L = 2[(ζ_u − t)⁺ − (ζ_0 − t)⁺ − Σ 1{ζ_k > t} Δζ_k]`.
pub fn local_time_tanaka(path: &DiffusionPath, t: f64) -> f64 {
    let mut half = 0.0;
    for w in path.values.windows(2) {
        let (a, b) = (w[0], w[1]);
        half += (b - t).max(0.0) - (a - t).max(0.0) - if a > t { b - a } else { 0.0 };
    }
    2.0 * half
}

/// Realized quadratic variation: sum of squared grid increments.
pub fn quadratic_variation(path: &DiffusionPath) -> f64 {
    path.values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
}

/// Quadratic variation accumulated while the path is at or below `level`,
/// i.e. the QV of the path with its excursions above `level` excised.
pub fn quadratic_variation_below(path: &DiffusionPath, level: f64) -> f64 {
    let n = path.values.len().saturating_sub(1);
    (0..n).filter(|&k| path.values[k] <= level).map(|k| step_qv(path, k)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::tree_from_excursion;
    use crate::rng::replica_seed;

    #[test]
    fn constant_scale_function() {
        let x = DiffusionPath::constant(3.0, 0.01, 2.0);
        let sf = scale_function(&x, 0.5).unwrap();
        assert_eq!(sf.eval(0.0), 0.0);
        assert!((sf.eval(1.3) - 3.9).abs() < 1e-12);
        assert!((sf.top() - 2.0).abs() < 1e-12);
        for &h in &[0.0, 0.137, 1.0, 1.999] {
            assert!((sf.inverse(sf.eval(h)) - h).abs() < 1e-9);
        }
        assert!(scale_function(&x, 0.0).is_err());
        assert!(scale_function(&x, 3.0).is_err());
    }

    #[test]
    fn scale_inverse_on_rough_path() {
        let (x, _) = integrate_catalytic_feller(&FellerConfig { dt: 1e-3, horizon: 3.0, seed: 4, ..Default::default() }).unwrap();
        let sf = scale_function(&x, 0.05).unwrap();
        let mut prev = -1.0;
        for k in 0..200 {
            let h = sf.top() * k as f64 / 200.0;
            let s = sf.eval(h);
            assert!(s > prev);
            prev = s;
            assert!((sf.inverse(s) - h).abs() <= sf.dt);
        }
    }

    #[test]
    fn feller_absorbs_and_freezes() {
        let cfg = FellerConfig { dt: 1e-3, horizon: 50.0, seed: 9, ..Default::default() };
        let (x, y) = integrate_catalytic_feller(&cfg).unwrap();
        let k = x.absorbed_at.expect("catalyst dies within 50 time units for this seed");
        assert!(x.values[k..].iter().all(|&v| v == 0.0));
        assert!(y.values[k..].iter().all(|&v| v == y.values[k]));
        assert!(x.values.iter().chain(&y.values).all(|&v| v >= 0.0));
        let (out, at) = race(&cfg).unwrap();
        match out {
            RaceOutcome::CatalystFirst => assert_eq!(at, k as f64 * cfg.dt),
            RaceOutcome::ReactantFirst => assert_eq!(Some(at), y.absorption_time()),
            RaceOutcome::Unresolved => panic!(),
        }
    }

    #[test]
    fn path_files_round_trip() {
        let (x, _) = integrate_catalytic_feller(&FellerConfig { dt: 0.01, horizon: 5.0, seed: 1, ..Default::default() }).unwrap();
        assert_eq!(DiffusionPath::from_csv(&x.to_csv(1)).unwrap(), (x.clone(), 1));
        let mut buf = Vec::new();
        x.write_binary(&mut buf, 77).unwrap();
        assert_eq!(DiffusionPath::read_binary(&buf[..]).unwrap(), (x, 77));
    }

    #[test]
    fn integral_of_linear_interpolant() {
        let p = DiffusionPath { dt: 0.5, values: vec![0.0, 1.0, 1.0, 3.0], absorbed_at: None, qv_increments: None };
        assert!((p.integral(0.0, 1.5) - (0.25 + 0.5 + 1.0)).abs() < 1e-12);
        assert!((p.integral(0.25, 0.75) - (0.5 * (0.5 + 1.0) * 0.25 + 0.25)).abs() < 1e-12);
    }

    #[test]
    fn limit_contour_stays_in_range_and_spends_budget() {
        let x = DiffusionPath::constant(1.0, 1e-3, 0.8);
        let c = simulate_limit_contour(&x, &ContourConfig { dt: 1e-5, seed: 3, y0: 0.5, ..Default::default() }).unwrap();
        assert!(c.zeta.values.iter().all(|&z| (0.0..=0.8).contains(&z)));
        assert!((c.root_local_time - 0.5).abs() < 1e-12);
        // With X ≡ 1 the scale map is the identity.
        assert!(c.zeta.values.iter().zip(&c.b.values).all(|(z, b)| (z - b).abs() < 1e-12));
        // Band estimate at the root sees half the right local time, which in
        // mass units with X = b2 = 1 equals the regulator.
        let band = local_time_estimate(&c.zeta, 0.0, 0.01);
        assert!((band - 0.5).abs() < 0.1, "{band}");
    }

    #[test]
    fn evolution_without_catalyst_is_a_tent() {
        // A vanishing catalyst produces no flips: the path runs straight to
        // the top and back.
        let cat = MassPath::from_steps(&[(0.0, 1e-300)], 2.0, 1).unwrap();
        let cfg = SimConfig { t_max: 2.0, ..Default::default() };
        let e = simulate_random_evolution(&cfg, &cat).unwrap();
        assert_eq!(e.points, vec![(0.0, 0.0), (1.0, 2.0), (2.0, 0.0)]);
        // A catalyst that is already extinct cuts everything at height 0.
        let dead = MassPath::from_steps(&[(0.0, 0.0)], 2.0, 1).unwrap();
        assert_eq!(simulate_random_evolution(&cfg, &dead).unwrap().points, vec![(0.0, 0.0)]);
    }

    #[test]
    fn evolution_flip_count_is_poisson() {
        // Constant catalyst c: up-moves end at flips with hazard n b2 c per
        // unit height, so the first peak is Exp(n b2 c) capped at the top,
        // which at rate 6 is reached with probability e^-18.
        let (n, c) = (3u32, 2.0);
        let cat = MassPath { times: vec![0.0], values: vec![c], horizon: 3.0, n };
        let mut sum = 0.0;
        let reps = 4000;
        for r in 0..reps {
            let cfg = SimConfig { n, seed: replica_seed(5, r), t_max: 3.0, initial_reactant_mass: 1.0 / n as f64, ..Default::default() };
            let e = simulate_random_evolution(&cfg, &cat).unwrap();
            sum += e.points[1].1;
        }
        let mean = sum / reps as f64;
        let target = 1.0 / (n as f64 * c);
        assert!((mean - target).abs() < 4.0 * target / (reps as f64).sqrt(), "{mean} vs {target}");
    }

    #[test]
    fn evolution_is_a_valid_contour() {
        let cat = MassPath::from_steps(&[(0.0, 1.0), (0.5, 2.0), (1.0, 0.5)], 3.0, 2).unwrap();
        for s in 0..50 {
            let cfg = SimConfig { n: 2, t_max: 3.0, delta: 0.4, seed: s, ..Default::default() };
            let e = simulate_random_evolution(&cfg, &cat).unwrap();
            e.validate().unwrap();
            assert!(e.max_height() <= 3.0);
            let f = tree_from_excursion(&e);
            f.validate().unwrap();
            assert_eq!(f.roots.len(), 2);
        }
    }

    #[test]
    fn streaming_summary_matches_stored_contour() {
        let (x, _) = integrate_catalytic_feller(&FellerConfig { dt: 1e-3, horizon: 5.0, seed: 12, ..Default::default() }).unwrap();
        let cfg = ContourConfig { delta: 0.3, dt: 1e-4, seed: 12, ..Default::default() };
        let c = simulate_limit_contour(&x, &cfg).unwrap();
        let levels = [0.1, 0.5, c.top];
        let s = summarize_limit_contour(&x, &cfg, &levels).unwrap();
        assert_eq!(s.steps, c.zeta.values.len() - 1);
        assert_eq!(s.max_height, c.zeta.values.iter().copied().fold(0.0, f64::max));
        assert_eq!(s.root_local_time, c.root_local_time);
        for (q, &l) in s.qv_below.iter().zip(&levels) {
            assert!((q - quadratic_variation_below(&c.zeta, l)).abs() <= 1e-9 * q.max(1.0));
        }
    }

    #[test]
    fn brownian_quadratic_variation() {
        let mut rng = stream_rng(8, stream::AUX);
        let dt: f64 = 1e-4;
        let mut v = vec![0.0];
        for _ in 0..20_000 {
            let z: f64 = StandardNormal.sample(&mut rng);
            v.push(v.last().unwrap() + 1.5 * dt.sqrt() * z);
        }
        let p = DiffusionPath { dt, values: v, absorbed_at: None, qv_increments: None };
        assert!((quadratic_variation(&p) / (2.25 * 2.0) - 1.0).abs() < 0.05);
        let smooth = DiffusionPath { dt, values: (0..1000).map(|k| k as f64 * dt).collect(), absorbed_at: None, qv_increments: None };
        assert!(quadratic_variation(&smooth) < 2e-5);
        assert_eq!(local_time_estimate(&smooth, 5.0, 0.1), 0.0);
    }

    #[test]
    fn tanaka_counts_crossings() {
        let below = DiffusionPath { dt: 1.0, values: vec![0.0, 0.7, 0.2], absorbed_at: None, qv_increments: None };
        assert_eq!(local_time_tanaka(&below, 1.0), 0.0);
        // One step up across the level and one step back: each crossing
        // contributes its overshoot.
        let q = DiffusionPath { dt: 1.0, values: vec![0.0, 1.5, 0.5], absorbed_at: None, qv_increments: None };
        assert_eq!(local_time_tanaka(&q, 1.0), 2.0);
    }
}
