//! Command-line front end. `simulate` writes sample paths, forests, contours
//! and point processes; `verify` runs the Monte Carlo suites; `convert` moves
//! between the forest, contour and point-process file formats.
//!
//! Settings come from an optional flat `key=value` file, overridden by
//! flags. Exit codes: 0 success, 1 failed check, 2 input error, 3 overflow.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use crate::contour::{contour_from_forest, tree_from_excursion, Excursion};
use crate::diffusion::{integrate_catalytic_feller, simulate_limit_contour, ContourConfig, DiffusionPath, FellerConfig};
use crate::error::{input, Error, Result};
use crate::particle::{simulate_catalyst, simulate_reactant_quenched, MassPath, Representation, SimConfig};
use crate::points::point_process_at_level;
use crate::rng::replica_seed;
use crate::rtree::FamilyForest;
use crate::verify::{run_suite, OracleReport, SuiteConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_OVERFLOW: i32 = 3;

/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "CATGEN_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "catgen", version, about = "Catalytic branching genealogies: simulate, verify, convert")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one or more replicas and write their files.
    Simulate(Box<SimulateArgs>),
    /// Run verification suites and write a JSON report.
    Verify(VerifyArgs),
    /// Convert between forest, contour, path and point-process files.
    Convert(ConvertArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Model {
    /// Exact particle system (catalyst and reactant forests).
    Particle,
    /// Euler scheme for the catalytic Feller pair.
    Feller,
    /// Feller catalyst plus the limit contour of the reactant.
    Contour,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Flat key=value settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<Model>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    b1: Option<f64>,
    #[arg(long)]
    b2: Option<f64>,
    /// Rescaling index: particles carry mass 1/n.
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    catalyst_mass: Option<f64>,
    #[arg(long)]
    reactant_mass: Option<f64>,
    /// Catalyst threshold; reactant forests are cut where the catalyst first
    /// drops to delta.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// galton_watson or birth_death.
    #[arg(long)]
    representation: Option<String>,
    #[arg(long)]
    population_cap: Option<usize>,
    /// Also write the reactant point process at this level.
    #[arg(long)]
    level: Option<f64>,
    /// Euler step for the Feller pair.
    #[arg(long)]
    dt: Option<f64>,
    /// Time step of the limit contour.
    #[arg(long)]
    contour_dt: Option<f64>,
    /// Quench the reactant on a saved catalyst mass path instead of
    /// simulating one (particle model only).
    #[arg(long)]
    catalyst: Option<PathBuf>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long, env = OUTPUT_ENV, default_value = "catgen-out")]
    out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Suite names, comma separated or repeated; `all` runs every suite.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    suite: Vec<String>,
    #[arg(long)]
    seed: u64,
    /// Replica count for every selected suite, overriding the defaults.
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long, env = OUTPUT_ENV, default_value = "catgen-out")]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
    /// List the suites and exit.
    #[arg(long)]
    list: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Target {
    Forest,
    Contour,
    Points,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    /// Forest file, contour file, or sampled path CSV.
    input: PathBuf,
    #[arg(long, value_enum)]
    to: Target,
    /// Traversal speed of an output contour.
    #[arg(long, default_value_t = 2.0)]
    speed: f64,
    /// Level of an output point process.
    #[arg(long)]
    level: Option<f64>,
    /// Spacing of an output point process.
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// Output file; standard output if absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Runs the CLI on the given arguments (including the program name) and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => cmd_simulate(*a).map(|()| true),
        Command::Verify(a) => cmd_verify(a),
        Command::Convert(a) => cmd_convert(a).map(|()| true),
    };
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Overflow { .. } => EXIT_OVERFLOW,
        Error::Input(_) | Error::Parse { .. } | Error::Io(_) => EXIT_INPUT,
    }
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => input("--jobs must be at least 1"),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(j).build().map_err(|e| Error::Input(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Parses a flat `key=value` file. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse { line: i + 1, msg: format!("expected key=value, got {line:?}") });
        };
        map.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}

/// Settings after merging the config file and the flags.
#[derive(Clone, Debug)]
struct Settings(BTreeMap<String, String>);

impl Settings {
    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).or_else(|_| input(format!("bad value {v:?} for {key}"))),
        }
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }
}

const KNOWN_KEYS: &[&str] = &[
    "model",
    "seed",
    "b1",
    "b2",
    "n",
    "catalyst_mass",
    "reactant_mass",
    "delta",
    "t_max",
    "representation",
    "population_cap",
    "level",
    "dt",
    "contour_dt",
    "catalyst",
    "replicas",
];

fn merge(a: &SimulateArgs) -> Result<Settings> {
    let mut map = match &a.config {
        Some(p) => parse_config(&fs::read_to_string(p)?)?,
        None => BTreeMap::new(),
    };
    if let Some(bad) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return input(format!("unknown config key {bad:?}"));
    }
    let mut set = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    };
    set("model", a.model.map(|m| format!("{m:?}").to_lowercase()));
    set("seed", a.seed.map(|v| v.to_string()));
    set("b1", a.b1.map(|v| v.to_string()));
    set("b2", a.b2.map(|v| v.to_string()));
    set("n", a.n.map(|v| v.to_string()));
    set("catalyst_mass", a.catalyst_mass.map(|v| v.to_string()));
    set("reactant_mass", a.reactant_mass.map(|v| v.to_string()));
    set("delta", a.delta.map(|v| v.to_string()));
    set("t_max", a.t_max.map(|v| v.to_string()));
    set("representation", a.representation.clone());
    set("population_cap", a.population_cap.map(|v| v.to_string()));
    set("level", a.level.map(|v| v.to_string()));
    set("dt", a.dt.map(|v| v.to_string()));
    set("contour_dt", a.contour_dt.map(|v| v.to_string()));
    set("catalyst", a.catalyst.as_ref().map(|p| p.display().to_string()));
    set("replicas", a.replicas.map(|v| v.to_string()));
    Ok(Settings(map))
}

fn sim_config(s: &Settings) -> Result<SimConfig> {
    let d = SimConfig::default();
    let Some(seed) = s.get("seed")? else {
        return input("a seed is required (--seed or seed= in the config file)");
    };
    let representation = match s.0.get("representation") {
        Some(r) => r.parse::<Representation>()?,
        None => d.representation,
    };
    let cfg = SimConfig {
        b1: s.or("b1", d.b1)?,
        b2: s.or("b2", d.b2)?,
        n: s.or("n", d.n)?,
        initial_catalyst_mass: s.or("catalyst_mass", d.initial_catalyst_mass)?,
        initial_reactant_mass: s.or("reactant_mass", d.initial_reactant_mass)?,
        delta: s.or("delta", d.delta)?,
        t_max: s.or("t_max", d.t_max)?,
        seed,
        representation,
        population_cap: s.or("population_cap", d.population_cap)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, content: &str) -> Result<()> {
    fs::write(dir.join(name), content)?;
    Ok(())
}

fn gnuplot_script(files: &[(&str, &str)], xlabel: &str, ylabel: &str) -> String {
    let mut s = format!(
        "# gnuplot -p plot.gp\nset datafile separator ','\nset key top right\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\nplot "
    );
    let parts: Vec<String> = files
        .iter()
        .map(|(f, title)| format!("'{f}' using 1:2 every ::1 with steps title '{title}'"))
        .collect();
    s += &parts.join(", \\\n     ");
    s.push('\n');
    s
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let s = merge(&a)?;
    let cfg = sim_config(&s)?;
    let replicas: usize = s.or("replicas", 1)?;
    if replicas == 0 {
        return input("replicas must be at least 1");
    }
    let model = match s.0.get("model").map(String::as_str) {
        None | Some("particle") => Model::Particle,
        Some("feller") => Model::Feller,
        Some("contour") => Model::Contour,
        Some(m) => return input(format!("unknown model {m:?}")),
    };
    let catalyst = match s.0.get("catalyst") {
        Some(p) if model == Model::Particle => Some(MassPath::from_csv(&fs::read_to_string(p)?)?),
        Some(_) => return input("--catalyst applies to the particle model only"),
        None => None,
    };
    fs::create_dir_all(&a.out)?;
    let dirs: Vec<PathBuf> = if replicas == 1 {
        vec![a.out.clone()]
    } else {
        (0..replicas).map(|r| a.out.join(format!("replica_{r:04}"))).collect()
    };
    for d in &dirs {
        fs::create_dir_all(d)?;
    }
    let results = with_jobs(a.jobs, || {
        dirs.par_iter()
            .enumerate()
            .map(|(r, dir)| {
                let seed = if replicas == 1 { cfg.seed } else { replica_seed(cfg.seed, r as u64) };
                let cfg = SimConfig { seed, ..cfg.clone() };
                match model {
                    Model::Particle => simulate_particle(&cfg, &s, catalyst.as_ref(), dir),
                    Model::Feller => simulate_feller(&cfg, &s, dir),
                    Model::Contour => simulate_contour(&cfg, &s, dir),
                }
            })
            .collect::<Vec<_>>()
    })?;
    let summaries = results.into_iter().collect::<Result<Vec<_>>>()?;
    if replicas > 1 {
        write(&a.out, "summary.json", &serde_json::to_string_pretty(&summaries).unwrap())?;
    }
    println!("wrote {} replica(s) to {}", replicas, a.out.display());
    Ok(())
}

fn simulate_particle(cfg: &SimConfig, s: &Settings, saved: Option<&MassPath>, dir: &Path) -> Result<serde_json::Value> {
    let (cat_path, cat_forest) = match saved {
        Some(p) => (p.clone(), None),
        None => {
            let (p, f) = simulate_catalyst(cfg)?;
            (p, Some(f))
        }
    };
    let (re_path, mut re_forest) = simulate_reactant_quenched(cfg, &cat_path)?;
    let cut = cat_path.stopping_time(cfg.delta).min(cfg.t_max);
    if cfg.delta > 0.0 {
        re_forest = re_forest.truncate(cut);
    }
    write(dir, "catalyst_mass.csv", &cat_path.to_csv())?;
    write(dir, "reactant_mass.csv", &re_path.to_csv())?;
    if let Some(f) = &cat_forest {
        write(dir, "catalyst_forest.txt", &f.to_text())?;
    }
    write(dir, "reactant_forest.txt", &re_forest.to_text())?;
    if !re_forest.is_empty() {
        write(dir, "reactant_contour.txt", &contour_from_forest(&re_forest, 2.0 * cfg.n as f64)?.to_text())?;
    }
    let mut summary = json!({
        "model": "particle",
        "seed": cfg.seed,
        "config": cfg,
        "catalyst_extinction": finite(cat_path.stopping_time(0.0)),
        "reactant_extinction": finite(re_path.stopping_time(0.0)),
        "reactant_cut": cut,
        "reactant_nodes": re_forest.len(),
        "reactant_height": re_forest.height(),
    });
    if let Some(t) = s.get::<f64>("level")? {
        let p = point_process_at_level(&re_forest, t, 1.0 / cfg.n as f64)?;
        let pop = re_forest.level_set(t).len();
        write(dir, "reactant_points.csv", &p.to_csv())?;
        summary["level"] = json!({ "t": t, "population": pop, "trees": p.tree_count(pop), "points": p.points.len() });
    }
    write(dir, "summary.json", &serde_json::to_string_pretty(&summary).unwrap())?;
    write(
        dir,
        "plot.gp",
        &gnuplot_script(&[("catalyst_mass.csv", "catalyst"), ("reactant_mass.csv", "reactant")], "t", "mass"),
    )?;
    Ok(summary)
}

fn finite(t: f64) -> Option<f64> {
    t.is_finite().then_some(t)
}

fn feller_config(cfg: &SimConfig, s: &Settings) -> Result<FellerConfig> {
    Ok(FellerConfig {
        b1: cfg.b1,
        b2: cfg.b2,
        x0: cfg.initial_catalyst_mass,
        y0: cfg.initial_reactant_mass,
        dt: s.or("dt", FellerConfig::default().dt)?,
        horizon: cfg.t_max,
        seed: cfg.seed,
        frozen_x: None,
    })
}

fn simulate_feller(cfg: &SimConfig, s: &Settings, dir: &Path) -> Result<serde_json::Value> {
    let (x, y) = integrate_catalytic_feller(&feller_config(cfg, s)?)?;
    write(dir, "X.csv", &x.to_csv(cfg.seed))?;
    write(dir, "Y.csv", &y.to_csv(cfg.seed))?;
    let summary = json!({
        "model": "feller",
        "seed": cfg.seed,
        "dt": x.dt,
        "horizon": x.horizon(),
        "catalyst_extinction": x.absorption_time(),
        "reactant_extinction": y.absorption_time(),
        "x_final": x.last(),
        "y_final": y.last(),
    });
    write(dir, "summary.json", &serde_json::to_string_pretty(&summary).unwrap())?;
    write(dir, "plot.gp", &gnuplot_script(&[("X.csv", "X"), ("Y.csv", "Y")], "t", "mass"))?;
    Ok(summary)
}

fn simulate_contour(cfg: &SimConfig, s: &Settings, dir: &Path) -> Result<serde_json::Value> {
    if !(cfg.delta > 0.0) {
        return input("the limit contour needs delta > 0");
    }
    let (x, _) = integrate_catalytic_feller(&feller_config(cfg, s)?)?;
    let c = simulate_limit_contour(
        &x,
        &ContourConfig {
            b2: cfg.b2,
            delta: cfg.delta,
            y0: cfg.initial_reactant_mass,
            dt: s.or("contour_dt", ContourConfig::default().dt)?,
            seed: cfg.seed,
            ..Default::default()
        },
    )?;
    write(dir, "X.csv", &x.to_csv(cfg.seed))?;
    write(dir, "zeta.csv", &c.zeta.to_csv(cfg.seed))?;
    let summary = json!({
        "model": "contour",
        "seed": cfg.seed,
        "delta": cfg.delta,
        "top": c.top,
        "contour_steps": c.zeta.values.len() - 1,
        "contour_duration": c.zeta.horizon(),
        "max_height": c.zeta.values.iter().copied().fold(0.0, f64::max),
        "root_local_time": c.root_local_time,
    });
    write(dir, "summary.json", &serde_json::to_string_pretty(&summary).unwrap())?;
    write(dir, "plot.gp", &gnuplot_script(&[("zeta.csv", "contour")], "u", "height"))?;
    Ok(summary)
}

fn cmd_verify(a: VerifyArgs) -> Result<bool> {
    if a.list {
        for name in crate::verify::suite_names() {
            println!("{name}");
        }
        return Ok(true);
    }
    let cfg = SuiteConfig { seed: a.seed, replicas: a.replicas };
    let names: Vec<&str> = a.suite.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        return input("no suite selected");
    }
    // Reject unknown names before spending time on the others.
    for n in &names {
        if *n != "all" && !crate::verify::suite_names().any(|k| k == *n) {
            return run_suite(n, &cfg).map(|_| false);
        }
    }
    let reports = with_jobs(a.jobs, || -> Result<Vec<OracleReport>> {
        let mut out = Vec::new();
        for n in &names {
            out.extend(run_suite(n, &cfg)?);
        }
        Ok(out)
    })??;
    fs::create_dir_all(&a.out)?;
    let path = a.out.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&reports).unwrap())?;
    for r in &reports {
        println!("{}", r.summary_line());
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} checks, {} failed; report written to {}", reports.len(), failed, path.display());
    Ok(failed == 0)
}

/// File kinds understood by `convert`.
enum Parsed {
    Forest(FamilyForest),
    Contour(Excursion),
    Path(DiffusionPath),
}

fn parse_any(text: &str) -> Result<Parsed> {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    if first.starts_with("roots=") {
        Ok(Parsed::Forest(FamilyForest::from_text(text)?))
    } else if first.starts_with("speed=") {
        Ok(Parsed::Contour(Excursion::from_text(text)?))
    } else if first.starts_with("# dt=") {
        Ok(Parsed::Path(DiffusionPath::from_csv(text)?.0))
    } else {
        input("unrecognized input: expected a forest, contour or sampled path file")
    }
}

fn cmd_convert(a: ConvertArgs) -> Result<()> {
    let forest = |p: &Parsed| -> Result<FamilyForest> {
        match p {
            Parsed::Forest(f) => Ok(f.clone()),
            Parsed::Contour(e) => Ok(tree_from_excursion(e)),
            Parsed::Path(x) => Ok(tree_from_excursion(&x.to_excursion()?)),
        }
    };
    let parsed = parse_any(&fs::read_to_string(&a.input)?)?;
    let text = match a.to {
        Target::Forest => forest(&parsed)?.to_text(),
        Target::Contour => match &parsed {
            Parsed::Forest(f) => contour_from_forest(f, a.speed)?.to_text(),
            Parsed::Contour(e) => e.to_text(),
            Parsed::Path(x) => x.to_excursion()?.to_text(),
        },
        Target::Points => {
            let Some(t) = a.level else {
                return input("--level is required for a point process");
            };
            point_process_at_level(&forest(&parsed)?, t, a.spacing)?.to_csv()
        }
    };
    match &a.output {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let m = parse_config("# comment\nseed = 7\n\nt-max=2 # trailing\n").unwrap();
        assert_eq!(m["seed"], "7");
        assert_eq!(m["t_max"], "2");
        assert!(matches!(parse_config("seed 7"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Input("x".into())), EXIT_INPUT);
        assert_eq!(exit_code(&Error::Overflow { cap: 1, time: 0.0 }), EXIT_OVERFLOW);
        assert_eq!(run(["catgen", "simulate", "--bogus"]), EXIT_INPUT);
        assert_eq!(run(["catgen", "verify", "--seed", "1", "--suite", "nope"]), EXIT_INPUT);
    }
}
