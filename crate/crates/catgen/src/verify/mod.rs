//! Closed-form oracles, statistical tests and the Monte Carlo suites that
//! compare simulations with the oracles.
//!
//! Every suite runs from a fixed seed, declares its level `alpha` (0.01
//! unless a fixed tolerance is used instead) and returns self-describing
//! [`OracleReport`]s.

pub mod oracles;
pub mod stats;
mod suites;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{input, Result};
use crate::rng::replica_seed;

pub use suites::*;

/// Outcome of one statistical check.
#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub name: String,
    /// The law being checked, in words and symbols.
    pub law: String,
    /// Observed statistic (estimate, test statistic or ratio).
    pub statistic: f64,
    /// Target value when the law reduces to a number.
    pub target: Option<f64>,
    /// `ci`, `tolerance`, `ks`, `ks2`, `poisson`, `chi2`, `exact`, `ratio`.
    pub test: String,
    pub p_value: Option<f64>,
    pub ci: Option<[f64; 2]>,
    pub alpha: f64,
    pub passed: bool,
    pub note: String,
}

impl OracleReport {
    fn new(name: &str, law: &str, test: &str) -> Self {
        OracleReport {
            name: name.into(),
            law: law.into(),
            statistic: f64::NAN,
            target: None,
            test: test.into(),
            p_value: None,
            ci: None,
            alpha: ALPHA,
            passed: false,
            note: String::new(),
        }
    }

    /// Sets the p-value and decides at level `alpha`.
    fn with_p(mut self, statistic: f64, p: f64) -> Self {
        self.statistic = statistic;
        self.p_value = Some(p);
        self.passed = p >= self.alpha;
        self
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// One line for terminal summaries.
    pub fn summary_line(&self) -> String {
        let mut s = format!("[{}] {:<28} stat={:.5}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.statistic);
        if let Some(t) = self.target {
            s += &format!(" target={t:.5}");
        }
        if let Some(p) = self.p_value {
            s += &format!(" p={p:.4}");
        }
        if let Some([lo, hi]) = self.ci {
            s += &format!(" ci=[{lo:.4}, {hi:.4}]");
        }
        if !self.note.is_empty() {
            s += &format!("  ({})", self.note);
        }
        s
    }
}

/// Declared level of every hypothesis test in the suites.
pub const ALPHA: f64 = 0.01;

/// Two-sided normal quantile for `ALPHA`.
const Z_ALPHA: f64 = 2.5758293035489;

/// Run-time knobs shared by all suites.
#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Overrides each suite's default replica count.
    pub replicas: Option<usize>,
}

impl SuiteConfig {
    pub fn new(seed: u64) -> Self {
        SuiteConfig { seed, replicas: None }
    }

    fn reps(&self, default: usize) -> usize {
        self.replicas.unwrap_or(default)
    }

    /// Seed of replica `i` of a suite; suites use disjoint salts.
    fn seed_for(&self, salt: u64, i: usize) -> u64 {
        replica_seed(self.seed ^ salt.wrapping_mul(0x2545_F491_4F6C_DD1D), i as u64)
    }
}

/// Maps replicas in parallel; results come back in replica order, so the
/// outcome does not depend on the thread count.
fn replicate<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..count).into_par_iter().map(f).collect()
}

type SuiteFn = fn(&SuiteConfig) -> Result<Vec<OracleReport>>;

/// Registered suites in acceptance order. The extra suites after the
/// fourteen acceptance checks cover further closed forms.
pub const SUITES: &[(&str, SuiteFn)] = &[
    ("hitting_prob", hitting_prob),
    ("extinction", extinction),
    ("mrca", mrca),
    ("codec", codec),
    ("point_process", point_process),
    ("representation", representation),
    ("random_evolution", random_evolution),
    ("limit_intensity", limit_intensity),
    ("reactant_intensity", reactant_intensity),
    ("tree_count", tree_count),
    ("stretching", stretching),
    ("comparison", comparison),
    ("qv_dichotomy", qv_dichotomy),
    ("martingale", martingale),
    ("laplace", laplace),
    ("feller_extinction", feller_extinction),
];

pub fn suite_names() -> impl Iterator<Item = &'static str> {
    SUITES.iter().map(|s| s.0)
}

/// Runs one suite by name, or every suite for `"all"`.
pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<Vec<OracleReport>> {
    if name == "all" {
        let mut out = Vec::new();
        for (_, f) in SUITES {
            out.extend(f(cfg)?);
        }
        return Ok(out);
    }
    match SUITES.iter().find(|s| s.0 == name) {
        Some((_, f)) => f(cfg),
        None => input(format!("unknown suite {name:?}; known: all, {}", suite_names().collect::<Vec<_>>().join(", "))),
    }
}
