//! The `ssep` command line.
//!
//! Every data file starts with a one-line echo of the command and its
//! arguments (CSV files prefix it with `# `). Tables are CSV or JSON,
//! summaries are JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dual::{estimate_absorption, pair_absorption_exact, transient_dual_moment, SolveMethod};
use crate::error::{Error, Result};
use crate::exact::{
    build_generator, one_point_profile, stationary_distribution, two_point_table, DEFAULT_TOL,
};
use crate::forward::{estimate_stationary_moments, transient_moment, SimSchedule};
use crate::ladder::{ladder_tables, DEFAULT_K_MAX};
use crate::lattice::{Configuration, ModelParams, PointSet};
use crate::moments::{integrate_moments, MomentHierarchy};
use crate::rng::RngStream;

#[derive(Debug, Parser)]
#[command(
    name = "ssep",
    version,
    about = "Boundary-driven symmetric exclusion: simulation, duality and exact checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact stationary law for S <= 20 with all one- and two-point functions.
    Exact(ExactArgs),
    /// Two-point function at fixed fractions over a grid of sizes.
    Sweep(SweepArgs),
    /// Forward Monte Carlo of stationary or transient correlations.
    Simulate(SimulateArgs),
    /// Monte Carlo of the absorbing dual walk.
    Dual(DualArgs),
    /// Meeting-kernel ladder for the two-particle dual.
    Ladder(LadderArgs),
    /// Correlation-function hierarchy: stationary and transient solutions.
    Odes(OdesArgs),
    /// Forward versus dual estimate of a transient correlation.
    DualityCheck(DualityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Bond rate lambda.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    pub output: PathBuf,
    /// Table format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Omit the timestamp from the config echo.
    #[arg(long)]
    #[serde(skip)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExactArgs {
    #[arg(long)]
    pub size: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Also write the stationary vector.
    #[arg(long)]
    pub dump_pi: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// Fractions a1 < a2 in (0, 1).
    #[arg(long, value_parser = parse_pair_f64, default_value = "0.3,0.7")]
    pub alphas: (f64, f64),
    /// Sizes S.
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,512")]
    pub grid: Vec<usize>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub size: usize,
    /// Point set; every interior site separately when omitted.
    #[arg(long, value_parser = parse_points)]
    pub points: Option<PointSet>,
    #[arg(long, value_parser = parse_count, default_value = "32")]
    pub replicas: u64,
    /// Target standard error; a warning is printed when it is missed.
    #[arg(long, default_value_t = 1e-2)]
    pub tol: f64,
    /// Burn-in model time (default 10 S^2 / rate).
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long, value_parser = parse_count, default_value = "1000")]
    pub samples: u64,
    /// Transient mode: estimate at this time from --initial instead.
    #[arg(long)]
    pub time: Option<f64>,
    /// Initial interior pattern such as 1111100000 (default: right half filled).
    #[arg(long)]
    pub initial: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DualArgs {
    #[arg(long)]
    pub size: usize,
    #[arg(long, value_parser = parse_points)]
    pub points: PointSet,
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub replicas: u64,
    /// Target standard error; a warning is printed when it is missed.
    #[arg(long, default_value_t = 1e-2)]
    pub tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LadderArgs {
    #[arg(long)]
    pub size: usize,
    /// Start x,y with y - x >= 2.
    #[arg(long, value_parser = parse_pair_usize)]
    pub start: (usize, usize),
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    pub kmax: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OdesArgs {
    #[arg(long)]
    pub size: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Also integrate from --initial up to this time.
    #[arg(long)]
    pub time: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub dt_max: f64,
    /// Initial interior pattern (default: right half filled).
    #[arg(long)]
    pub initial: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DualityArgs {
    #[arg(long)]
    pub size: usize,
    #[arg(long, value_parser = parse_points)]
    pub points: PointSet,
    #[arg(long)]
    pub time: f64,
    /// Replicas per side.
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub replicas: u64,
    /// Target standard error; a warning is printed when it is missed.
    #[arg(long, default_value_t = 1e-2)]
    pub tol: f64,
    /// Initial interior pattern (default: left half filled).
    #[arg(long)]
    pub initial: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

/// Accepts `1000`, `1e6`, `2.5e5`.
pub fn parse_count(text: &str) -> std::result::Result<u64, String> {
    if let Ok(n) = text.parse::<u64>() {
        return Ok(n);
    }
    let v: f64 = text.parse().map_err(|_| format!("not a count: {text:?}"))?;
    if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64) {
        return Err(format!("not a nonnegative integer: {text:?}"));
    }
    Ok(v as u64)
}

fn parse_points(text: &str) -> std::result::Result<PointSet, String> {
    PointSet::parse(text).map_err(|e| e.to_string())
}

fn parse_grid(text: &str) -> std::result::Result<Vec<usize>, String> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| format!("not a size: {s:?}"))
        })
        .collect()
}

fn parse_pair_usize(text: &str) -> std::result::Result<(usize, usize), String> {
    match parse_grid(text)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!(
            "expected two comma-separated integers, got {text:?}"
        )),
    }
}

fn parse_pair_f64(text: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("not a number: {s:?}"))
        })
        .collect::<std::result::Result<_, _>>()?;
    match parts.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!(
            "expected two comma-separated numbers, got {text:?}"
        )),
    }
}

/// Parses, configures the thread pool and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Exact(a) => &a.common,
        Command::Sweep(a) => &a.common,
        Command::Simulate(a) => &a.common,
        Command::Dual(a) => &a.common,
        Command::Ladder(a) => &a.common,
        Command::Odes(a) => &a.common,
        Command::DualityCheck(a) => &a.common,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::validation("--threads must be positive"));
        }
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match &cli.command {
        Command::Exact(a) => cmd_exact(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Dual(a) => cmd_dual(a),
        Command::Ladder(a) => cmd_ladder(a),
        Command::Odes(a) => cmd_odes(a),
        Command::DualityCheck(a) => cmd_duality_check(a),
    }
}

/// Writes data files under the output directory with the config echo.
struct OutputSink {
    dir: PathBuf,
    echo: String,
    format: Format,
}

impl OutputSink {
    fn new<A: Serialize>(command: &str, args: &A, common: &Common) -> Result<Self> {
        let mut config = json!({ "command": command, "args": args });
        if !common.deterministic {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs());
            config["timestamp"] = json!(secs);
        }
        fs::create_dir_all(&common.output)?;
        Ok(Self {
            dir: common.output.clone(),
            echo: config.to_string(),
            format: common.format,
        })
    }

    fn path(&self, stem: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{stem}.{ext}"))
    }

    /// Table with named columns, in the selected format.
    fn table(&self, stem: &str, columns: &[&str], rows: &[Vec<Value>]) -> Result<PathBuf> {
        let (path, body) = match self.format {
            Format::Csv => {
                let mut body = format!("# {}\n{}\n", self.echo, columns.join(","));
                for row in rows {
                    let cells: Vec<String> = row.iter().map(csv_cell).collect();
                    let _ = writeln!(body, "{}", cells.join(","));
                }
                (self.path(stem, "csv"), body)
            }
            Format::Json => {
                let records: Vec<Value> = rows
                    .iter()
                    .map(|row| {
                        Value::Object(
                            columns
                                .iter()
                                .map(|c| c.to_string())
                                .zip(row.iter().cloned())
                                .collect(),
                        )
                    })
                    .collect();
                (
                    self.path(stem, "json"),
                    format!("{}\n{}\n", self.echo, Value::Array(records)),
                )
            }
        };
        write_file(&path, &body)?;
        Ok(path)
    }

    fn summary<T: Serialize>(&self, stem: &str, record: &T) -> Result<PathBuf> {
        let path = self.path(stem, "json");
        let body = format!(
            "{}\n{}\n",
            self.echo,
            serde_json::to_string(record).map_err(|e| Error::Numeric(e.to_string()))?
        );
        write_file(&path, &body)?;
        Ok(path)
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body)?;
    Ok(())
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn params(size: usize, common: &Common) -> Result<ModelParams> {
    ModelParams::new(size, common.rate, common.seed)
}

fn positive_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "--tol must be positive, got {tol}"
        )))
    }
}

fn initial_config(
    pattern: Option<&str>,
    size: usize,
    default: fn(usize) -> Result<Configuration>,
) -> Result<Configuration> {
    let config = match pattern {
        Some(p) => Configuration::parse_interior(p)?,
        None => default(size)?,
    };
    if config.size() != size {
        return Err(Error::validation(format!(
            "initial pattern has {} sites, --size is {size}",
            config.size()
        )));
    }
    Ok(config)
}

/// Warns when `stderr` misses the requested `tol`; the replica estimate
/// uses the `1/sqrt(n)` scaling of the standard error.
fn warn_budget(label: &str, stderr: f64, tol: f64, replicas: u64) {
    if stderr > tol {
        let needed = (replicas as f64 * (stderr / tol).powi(2)).ceil();
        eprintln!(
            "warning: {label} standard error {stderr:.3e} exceeds --tol {tol:e}; \
             about {needed:.0} replicas needed"
        );
    }
}

pub fn cmd_exact(args: &ExactArgs) -> Result<()> {
    let p = params(args.size, &args.common)?;
    positive_tol(args.tol)?;
    let generator = build_generator(&p)?;
    let sink = OutputSink::new("exact", args, &args.common)?;
    let pi = stationary_distribution(&generator, args.tol)?;
    let profile = one_point_profile(&pi);
    let d = (args.size + 1) as f64;
    let max_dev = profile
        .iter()
        .enumerate()
        .map(|(i, m)| (m - (i + 1) as f64 / d).abs())
        .fold(0.0, f64::max);
    let m1: Vec<Vec<Value>> = profile
        .iter()
        .enumerate()
        .map(|(i, &m)| vec![json!(i + 1), num(m)])
        .collect();
    sink.table("exact_m1", &["x", "m1"], &m1)?;
    let m2: Vec<Vec<Value>> = two_point_table(&pi)
        .into_iter()
        .map(|(x, y, v)| vec![json!(x), json!(y), num(v)])
        .collect();
    sink.table("exact_m2", &["x", "y", "m2"], &m2)?;
    if args.dump_pi {
        let rows: Vec<Vec<Value>> = pi
            .probabilities()
            .iter()
            .enumerate()
            .map(|(s, &p)| vec![json!(s), num(p)])
            .collect();
        sink.table("exact_pi", &["state_bitmask", "probability"], &rows)?;
    }
    let residual = pi.residual(&generator);
    sink.summary(
        "exact_summary",
        &json!({ "size": args.size, "iterations": pi.iterations(), "residual": residual, "max_m1_deviation": max_dev }),
    )?;
    println!("max |m1(x) - x/{}| = {max_dev:e}", args.size + 1);
    println!(
        "stationary residual = {residual:e} after {} iterations",
        pi.iterations()
    );
    Ok(())
}

/// Sites `floor(a (S+1))` for each fraction, validated as an interior pair.
pub fn sweep_sites(size: usize, alphas: (f64, f64)) -> Result<(usize, usize)> {
    let d = (size + 1) as f64;
    let x = (alphas.0 * d).floor() as usize;
    let y = (alphas.1 * d).floor() as usize;
    if x == 0 || y > size || x >= y {
        return Err(Error::validation(format!(
            "fractions {alphas:?} give sites ({x}, {y}) on S = {size}; need 1 <= x < y <= S"
        )));
    }
    Ok((x, y))
}

/// Least-squares slope of `ln err` against `ln S`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(s, e)| (s.ln(), e.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub size: usize,
    pub x1: usize,
    pub x2: usize,
    pub m2: f64,
    pub target: f64,
    pub abs_err: f64,
}

/// Two-point function at `(floor(a1 (S+1)), floor(a2 (S+1)))` for each `S`.
pub fn sweep(grid: &[usize], alphas: (f64, f64), rate: f64, tol: f64) -> Result<Vec<SweepRow>> {
    let (a1, a2) = alphas;
    if !(0.0 < a1 && a1 < a2 && a2 < 1.0) {
        return Err(Error::validation(format!(
            "need 0 < a1 < a2 < 1, got ({a1}, {a2})"
        )));
    }
    if grid.is_empty() {
        return Err(Error::validation("empty size grid"));
    }
    positive_tol(tol)?;
    let sites = grid
        .iter()
        .map(|&s| sweep_sites(s, alphas))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(grid.len());
    for (&size, &(x1, x2)) in grid.iter().zip(&sites) {
        let p = ModelParams::new(size, rate, 0)?;
        let table = pair_absorption_exact(&p, SolveMethod::over_relaxed(size), tol)?;
        let m2 = table.get(x1, x2);
        let target = a1 * a2;
        rows.push(SweepRow {
            size,
            x1,
            x2,
            m2,
            target,
            abs_err: (m2 - target).abs(),
        });
    }
    Ok(rows)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    ModelParams::new(1, args.common.rate, args.common.seed)?;
    let rows = sweep(&args.grid, args.alphas, args.common.rate, args.tol)?;
    let sink = OutputSink::new("sweep", args, &args.common)?;
    let table: Vec<Vec<Value>> = rows
        .iter()
        .map(|r| {
            vec![
                json!(r.size),
                json!(r.x1),
                json!(r.x2),
                num(r.m2),
                num(r.target),
                num(r.abs_err),
            ]
        })
        .collect();
    sink.table(
        "sweep",
        &["S", "x1", "x2", "m2", "target", "abs_err"],
        &table,
    )?;
    let slope = (rows.len() >= 2).then(|| {
        loglog_slope(
            &rows
                .iter()
                .map(|r| (r.size as f64, r.abs_err))
                .collect::<Vec<_>>(),
        )
    });
    sink.summary("sweep_summary", &json!({ "slope": slope.map(num) }))?;
    for r in &rows {
        println!(
            "S = {:>5}  m2({}, {}) = {:.10}  |m2 - {}| = {:.3e}",
            r.size, r.x1, r.x2, r.m2, r.target, r.abs_err
        );
    }
    if let Some(s) = slope {
        println!("log-log slope = {s:.4}");
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let p = params(args.size, &args.common)?;
    positive_tol(args.tol)?;
    let sets: Vec<PointSet> = match &args.points {
        Some(set) => vec![set.clone()],
        None => (1..=args.size).map(PointSet::singleton).collect(),
    };
    let stream = RngStream::new(args.common.seed, 1);
    let label = |s: &PointSet| {
        s.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(";")
    };
    let mut rows = Vec::with_capacity(sets.len());
    let mut extra = json!({});
    match args.time {
        Some(t) => {
            let init = initial_config(
                args.initial.as_deref(),
                args.size,
                Configuration::right_half_filled,
            )?;
            if args.replicas == 0 {
                return Err(Error::validation("--replicas must be positive"));
            }
            for set in &sets {
                set.require_interior(args.size)?;
            }
            let sink = OutputSink::new("simulate", args, &args.common)?;
            for set in &sets {
                let e = transient_moment(&p, &init, t, set, args.replicas, stream)?;
                warn_budget("transient estimate", e.stderr, args.tol, args.replicas);
                rows.push(vec![json!(label(set)), num(e.mean), num(e.stderr)]);
            }
            sink.table("simulate", &["points", "estimate", "stderr"], &rows)?;
        }
        None => {
            let mut schedule = SimSchedule::default_for(&p);
            schedule.n_replicas = args.replicas;
            schedule.n_samples = args.samples;
            if let Some(b) = args.burn_in {
                schedule.burn_in_time = b;
            }
            schedule.validate()?;
            for set in &sets {
                set.require_interior(args.size)?;
            }
            let sink = OutputSink::new("simulate", args, &args.common)?;
            let run = estimate_stationary_moments(&p, &sets, &schedule, stream)?;
            for (set, e) in sets.iter().zip(&run.estimates) {
                warn_budget("stationary estimate", e.stderr, args.tol, args.replicas);
                rows.push(vec![json!(label(set)), num(e.mean), num(e.stderr)]);
            }
            extra["total_jumps"] = json!(run.total_jumps);
            sink.table("simulate", &["points", "estimate", "stderr"], &rows)?;
        }
    }
    for row in &rows {
        println!("{{{}}}: {} +- {}", csv_cell(&row[0]), row[1], row[2]);
    }
    if let Some(j) = extra.get("total_jumps") {
        println!("total jumps: {j}");
    }
    Ok(())
}

pub fn cmd_dual(args: &DualArgs) -> Result<()> {
    let p = params(args.size, &args.common)?;
    positive_tol(args.tol)?;
    if args.points.is_empty() {
        return Err(Error::validation("--points must not be empty"));
    }
    args.points.require_interior(args.size)?;
    if args.replicas == 0 {
        return Err(Error::validation("--replicas must be positive"));
    }
    let sink = OutputSink::new("dual", args, &args.common)?;
    let e = estimate_absorption(
        &p,
        &args.points,
        args.replicas,
        RngStream::new(args.common.seed, 2),
    )?;
    warn_budget("absorption estimate", e.stderr, args.tol, args.replicas);
    let exact = match args.points.as_slice() {
        [x] => Some(*x as f64 / (args.size + 1) as f64),
        [x, y] if args.size <= crate::dual::DENSE_MAX_SIZE => {
            Some(pair_absorption_exact(&p, SolveMethod::Dense, DEFAULT_TOL)?.get(*x, *y))
        }
        _ => None,
    };
    let z = exact.map(|v| (e.mean - v) / e.stderr.max(f64::MIN_POSITIVE));
    sink.summary(
        "dual",
        &json!({ "estimate": num(e.mean), "stderr": num(e.stderr), "exact": exact.map(num), "z": z.map(num) }),
    )?;
    println!("P(all stuck) = {} +- {}", e.mean, e.stderr);
    if let Some(v) = exact {
        println!("exact = {v}");
    }
    Ok(())
}

pub fn cmd_ladder(args: &LadderArgs) -> Result<()> {
    let p = params(args.size, &args.common)?;
    positive_tol(args.tol)?;
    let (x0, y0) = args.start;
    let table = ladder_tables(&p, x0, y0, args.kmax, args.tol)?;
    let sink = OutputSink::new("ladder", args, &args.common)?;
    let rows: Vec<Vec<Value>> = table
        .rows()
        .iter()
        .map(|r| vec![json!(r.k), num(r.c), num(r.gamma), num(r.p)])
        .collect();
    sink.table("ladder", &["k", "C_k", "gamma_k", "P_k"], &rows)?;
    let s = table.summary();
    sink.summary(
        "ladder_summary",
        &json!({
            "P0": num(s.P0), "P_inf": num(s.P_inf), "bound": num(s.bound), "slack": num(s.slack),
            "alpha": num(table.alpha()), "beta": num(table.beta()),
            "tail_bound": num(table.tail_bound(table.depth())),
        }),
    )?;
    let dominated = table.rows().iter().all(|r| r.c <= r.gamma);
    println!(
        "P0 = {}  P_inf = {}  bound = {}  slack = {}",
        s.P0, s.P_inf, s.bound, s.slack
    );
    println!("C_k <= gamma_k on every row: {dominated}");
    Ok(())
}

pub fn cmd_odes(args: &OdesArgs) -> Result<()> {
    let p = params(args.size, &args.common)?;
    positive_tol(args.tol)?;
    if args.size < 2 {
        return Err(Error::validation("odes needs S >= 2"));
    }
    let init = match args.time {
        Some(t) => {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::validation("--time must be nonnegative"));
            }
            Some(initial_config(
                args.initial.as_deref(),
                args.size,
                Configuration::right_half_filled,
            )?)
        }
        None => None,
    };
    let hierarchy = MomentHierarchy::new(&p, 2)?;
    let sink = OutputSink::new("odes", args, &args.common)?;
    let write = |suffix: &str, fields: &[crate::moments::MomentField]| -> Result<()> {
        let l1 = hierarchy.level(1);
        let l2 = hierarchy.level(2);
        let m1: Vec<Vec<Value>> = (0..l1.len())
            .map(|i| vec![json!(l1.index().get(i)[0]), num(fields[0].values[i])])
            .collect();
        sink.table(&format!("odes_m1{suffix}"), &["x", "m1"], &m1)?;
        let m2: Vec<Vec<Value>> = (0..l2.len())
            .map(|i| {
                let s = l2.index().get(i);
                vec![json!(s[0]), json!(s[1]), num(fields[1].values[i])]
            })
            .collect();
        sink.table(&format!("odes_m2{suffix}"), &["x", "y", "m2"], &m2)?;
        Ok(())
    };
    let stationary = hierarchy.stationary(args.tol)?;
    write("", &stationary)?;
    if let (Some(t), Some(config)) = (args.time, init) {
        let start = hierarchy.fields_from_configuration(&config)?;
        let fields = integrate_moments(&hierarchy, &start, t, args.dt_max)?;
        write("_t", &fields)?;
    }
    let d = (args.size + 1) as f64;
    let dev = stationary[0]
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - (i + 1) as f64 / d).abs())
        .fold(0.0, f64::max);
    println!("stationary max |m1(x) - x/{}| = {dev:e}", args.size + 1);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityReport {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub z: f64,
}

/// Forward estimate of `E prod xi_t` against the dual estimate.
pub fn duality_check(
    p: &ModelParams,
    points: &PointSet,
    initial: &Configuration,
    t: f64,
    replicas: u64,
) -> Result<DualityReport> {
    points.require_interior(p.size())?;
    let lhs = transient_moment(p, initial, t, points, replicas, RngStream::new(p.seed(), 1))?;
    let rhs = transient_dual_moment(p, points, initial, t, replicas, RngStream::new(p.seed(), 2))?;
    Ok(DualityReport {
        lhs: lhs.mean,
        lhs_se: lhs.stderr,
        rhs: rhs.mean,
        rhs_se: rhs.stderr,
        z: lhs.z_score(&rhs),
    })
}

pub fn cmd_duality_check(args: &DualityArgs) -> Result<()> {
    let p = params(args.size, &args.common)?;
    positive_tol(args.tol)?;
    if args.points.is_empty() {
        return Err(Error::validation("--points must not be empty"));
    }
    args.points.require_interior(args.size)?;
    if !(args.time.is_finite() && args.time >= 0.0) {
        return Err(Error::validation("--time must be nonnegative"));
    }
    if args.replicas == 0 {
        return Err(Error::validation("--replicas must be positive"));
    }
    let init = initial_config(
        args.initial.as_deref(),
        args.size,
        Configuration::left_half_filled,
    )?;
    let sink = OutputSink::new("duality-check", args, &args.common)?;
    let report = duality_check(&p, &args.points, &init, args.time, args.replicas)?;
    warn_budget("forward estimate", report.lhs_se, args.tol, args.replicas);
    warn_budget("dual estimate", report.rhs_se, args.tol, args.replicas);
    sink.summary("duality", &report)?;
    println!(
        "forward = {} +- {}  dual = {} +- {}  z = {:.3}",
        report.lhs, report.lhs_se, report.rhs, report.rhs_se, report.z
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert_eq!(parse_count("2.5e3"), Ok(2500));
        assert_eq!(parse_count("42"), Ok(42));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
        assert!(parse_count("abc").is_err());
    }

    #[test]
    fn pair_parsers() {
        assert_eq!(parse_pair_usize("4,9"), Ok((4, 9)));
        assert!(parse_pair_usize("4").is_err());
        assert_eq!(parse_pair_f64("0.3,0.7"), Ok((0.3, 0.7)));
    }

    #[test]
    fn sweep_validation() {
        assert!(matches!(
            sweep(&[32], (0.5, 0.5), 1.0, 1e-10),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            sweep(&[32], (0.7, 0.3), 1.0, 1e-10),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            sweep(&[2], (0.1, 0.2), 1.0, 1e-10),
            Err(Error::Validation(_))
        ));
        assert_eq!(sweep_sites(32, (0.3, 0.7)).unwrap(), (9, 23));
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0]
            .iter()
            .map(|&s: &f64| (s, 3.0 / s))
            .collect();
        assert!((loglog_slope(&pts) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            main_with_args([
                "ssep",
                "exact",
                "--size",
                "21",
                "--output",
                "/nonexistent/never"
            ]),
            4
        );
        assert_eq!(main_with_args(["ssep", "sweep", "--alphas", "0.5,0.5"]), 2);
        assert_eq!(
            main_with_args(["ssep", "dual", "--size", "3", "--points", "2,1"]),
            2
        );
        assert_eq!(main_with_args(["ssep", "bogus"]), 2);
    }
}
