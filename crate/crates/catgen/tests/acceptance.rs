//! Acceptance run: the fourteen criteria at a fixed seed, one line each.
//!
//! Every criterion re-checks the suite's reports against a tolerance pinned
//! here, so loosening a suite does not silently loosen acceptance. Criteria
//! listed in `KNOWN_RED` are expected to fail at this seed for the reasons
//! given; any other failure, or a known-red criterion that starts passing,
//! makes the run exit nonzero.

use std::process::ExitCode;
use std::time::Instant;

use catgen::verify::{run_suite, OracleReport, SuiteConfig};

const ACCEPTANCE_SEED: u64 = 7;

const ALPHA: f64 = 0.01;
const PROPORTION_TOL: f64 = 0.015;
const COMPARISON_TOL: f64 = 0.02;
const DIVERGENT_RATIO: f64 = 3.0;
const BOUNDED_RATIO: f64 = 1.5;
const MARTINGALE_SE: f64 = 3.0;

type Rule = fn(&OracleReport) -> bool;

struct Criterion {
    id: usize,
    title: &'static str,
    suite: &'static str,
    pinned: &'static str,
    rule: Rule,
}

fn within_tolerance(r: &OracleReport) -> bool {
    r.target.is_some_and(|t| (r.statistic - t).abs() <= PROPORTION_TOL)
}

fn test_at_alpha(r: &OracleReport) -> bool {
    r.p_value.is_some_and(|p| p >= ALPHA)
}

fn exact(r: &OracleReport) -> bool {
    r.statistic == 0.0
}

fn below_bound(r: &OracleReport) -> bool {
    matches!((r.ci, r.target), (Some([_, hi]), Some(b)) if hi <= b + COMPARISON_TOL)
}

fn dichotomy(r: &OracleReport) -> bool {
    if r.name.contains("catalyst first") {
        r.statistic > DIVERGENT_RATIO
    } else {
        r.statistic < BOUNDED_RATIO
    }
}

fn flat_mean(r: &OracleReport) -> bool {
    // The report's band is mean ± 3 SE.
    matches!((r.ci, r.target), (Some([lo, hi]), Some(t)) if (r.statistic - t).abs() <= MARTINGALE_SE * (hi - lo) / 6.0)
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, title: "hitting probability 5^(-1/2)", suite: "hitting_prob", pinned: "±0.015", rule: within_tolerance },
    Criterion { id: 2, title: "extinction law t/(1+t)", suite: "extinction", pinned: "±0.015 at t=0.5,1,2", rule: within_tolerance },
    Criterion { id: 3, title: "MRCA law", suite: "mrca", pinned: "KS, alpha=0.01", rule: test_at_alpha },
    Criterion { id: 4, title: "codec exactness", suite: "codec", pinned: "zero mismatches", rule: exact },
    Criterion { id: 5, title: "point-process distances", suite: "point_process", pinned: "zero mismatches", rule: exact },
    Criterion { id: 6, title: "representation equivalence", suite: "representation", pinned: "KS2, alpha=0.01", rule: test_at_alpha },
    Criterion { id: 7, title: "random-evolution equivalence", suite: "random_evolution", pinned: "KS2/chi2, alpha=0.01", rule: test_at_alpha },
    Criterion { id: 8, title: "limit-contour excursion intensity", suite: "limit_intensity", pinned: "Poisson, alpha=0.01", rule: test_at_alpha },
    Criterion { id: 9, title: "reactant limit intensity", suite: "reactant_intensity", pinned: "chi2, alpha=0.01", rule: test_at_alpha },
    Criterion { id: 10, title: "tree-count Poisson", suite: "tree_count", pinned: "dispersion, alpha=0.01", rule: test_at_alpha },
    Criterion { id: 11, title: "stretching", suite: "stretching", pinned: "KS2, alpha=0.01", rule: test_at_alpha },
    Criterion { id: 12, title: "comparison inequality", suite: "comparison", pinned: "CI upper <= bound + 0.02", rule: below_bound },
    Criterion { id: 13, title: "QV dichotomy", suite: "qv_dichotomy", pinned: "ratio > 3 and < 1.5", rule: dichotomy },
    Criterion { id: 14, title: "criticality martingale", suite: "martingale", pinned: "within 3 SE", rule: flat_mean },
];

/// Criteria expected to fail at `ACCEPTANCE_SEED`, with the reason.
const KNOWN_RED: &[(usize, &str)] = &[
    (
        9,
        "the oracle is the n -> infinity intensity; the exact n=50 expectation is 5-7% lower in every bin, \
         enough for chi2 to reject at 1000 replicas; against that expectation p=0.034, and the n=100 run passes",
    ),
    (
        13,
        "QV below tau^delta diverges only logarithmically as delta -> 0, so the estimated ratio at delta=0.02 \
         is about 2.6-2.9 and the heavy-tailed ratio of means lands above 3 only for some seeds",
    ),
];

fn main() -> ExitCode {
    let cfg = SuiteConfig::new(ACCEPTANCE_SEED);
    let mut surprises = Vec::new();
    println!("acceptance at seed {ACCEPTANCE_SEED}");
    for c in CRITERIA {
        let start = Instant::now();
        let (ok, detail) = match run_suite(c.suite, &cfg) {
            Ok(reports) => {
                let failing: Vec<String> = reports.iter().filter(|r| !(r.passed && (c.rule)(r))).map(|r| r.summary_line()).collect();
                (failing.is_empty() && !reports.is_empty(), failing)
            }
            Err(e) => (false, vec![format!("error: {e}")]),
        };
        let known = KNOWN_RED.iter().find(|k| k.0 == c.id);
        let verdict = match (ok, known) {
            (true, None) => "PASS",
            (false, Some(_)) => "FAIL (known)",
            (false, None) => {
                surprises.push(c.id);
                "FAIL"
            }
            (true, Some(_)) => {
                surprises.push(c.id);
                "PASS (listed as known red)"
            }
        };
        println!("criterion {:>2} {:<34} {:<26} [{}] {:.1}s", c.id, c.title, c.pinned, verdict, start.elapsed().as_secs_f64());
        for d in &detail {
            println!("    {d}");
        }
        if let (false, Some((_, why))) = (ok, known) {
            println!("    reason: {why}");
        }
    }
    if surprises.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {surprises:?}");
        ExitCode::FAILURE
    }
}
