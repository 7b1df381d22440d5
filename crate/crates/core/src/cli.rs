//! Command-line front end.
//!
//! Every subcommand produces a table. CSV output starts with `# key: value`
//! metadata lines followed by a fixed header; JSON output is an object with
//! `metadata` and `rows`. Floats are written with 17 significant digits so
//! parsing the text gives back the same `f64`.

use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::asymptotics::{self, LimitConstants};
use crate::error::{Error, Result};
use crate::exact::{self, RationalEvolution};
use crate::genfun::{self, EvalPoint};
use crate::montecarlo::{self, StudyMode};
use crate::walk::{self, ReinforcementParams, SeedSpec, RNG_ALGORITHM};

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "ORRW_THREADS";

#[derive(Debug, Parser)]
#[command(name = "orrw", version, about = "Once-reinforced random walk on the half-line")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Debug, Args, Serialize)]
struct IoArgs {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<std::path::PathBuf>,
    /// Worker threads (0 = all cores). Overridden by ORRW_THREADS.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ConvergeMode {
    Exact,
    Mc,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Monte Carlo estimate of E[(R_n/√n)^ℓ].
    Simulate(SimulateArgs),
    /// Exact range moments, or the law of S_k with --k.
    Exact(ExactArgs),
    /// Generating functions at s: g and G at --x, E[s^S_k] at --k, H_ℓ at --ell.
    Gf(GfArgs),
    /// Limit constants J_ℓ, K_{ℓ−1} and the moment limit for ℓ ≤ ℓ_max.
    Limits(LimitsArgs),
    /// Normalised moments against their limit along a grid of horizons.
    Converge(ConvergeArgs),
    /// H_ℓ(s)(1−s)^{(ℓ+3)/2}/K_ℓ as s → 1.
    Blowup(BlowupArgs),
    /// Deterministic invariant suite; exit 0 iff every check passes.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    /// Reinforcement parameter, decimal or `p/q`.
    #[arg(long)]
    c: String,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    ell: u32,
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
}

#[derive(Debug, Args, Serialize)]
struct ExactArgs {
    #[arg(long)]
    c: String,
    /// Single horizon.
    #[arg(long, conflicts_with = "n_grid")]
    n: Option<u64>,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',')]
    n_grid: Vec<u64>,
    /// Comma-separated moment orders.
    #[arg(long, value_delimiter = ',', conflicts_with = "ell_max")]
    ell: Vec<u32>,
    /// Emit every order 1..=ell_max.
    #[arg(long)]
    ell_max: Option<u32>,
    /// Report P(S_k = n) for n ≤ --n instead of moments.
    #[arg(long)]
    k: Option<u64>,
    #[arg(long, default_value_t = exact::DEFAULT_EPS_PRUNE)]
    eps_prune: f64,
    /// Exit 1 if any row's error bound exceeds this.
    #[arg(long)]
    max_error: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct GfArgs {
    #[arg(long)]
    c: String,
    #[arg(long, conflicts_with = "s_grid")]
    s: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    s_grid: Vec<f64>,
    #[arg(long)]
    x: Option<u64>,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    ell: Option<u32>,
    /// Relative tolerance for the H_ℓ series.
    #[arg(long, default_value_t = 1e-12)]
    rel_tol: f64,
}

#[derive(Debug, Args, Serialize)]
struct LimitsArgs {
    #[arg(long)]
    c: String,
    #[arg(long, default_value_t = 6)]
    ell_max: u32,
    #[arg(long, default_value_t = asymptotics::DEFAULT_ABS_TOL)]
    tol: f64,
}

#[derive(Debug, Args, Serialize)]
struct ConvergeArgs {
    #[arg(long)]
    c: String,
    #[arg(long, value_delimiter = ',', required = true)]
    n_grid: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    ell: u32,
    #[arg(long, value_enum, default_value_t = ConvergeMode::Exact)]
    mode: ConvergeMode,
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long, default_value_t = exact::DEFAULT_EPS_PRUNE)]
    eps_prune: f64,
    /// Exit 1 if an exact-mode error bound exceeds this.
    #[arg(long, default_value_t = 1e-6)]
    max_error: f64,
}

#[derive(Debug, Args, Serialize)]
struct BlowupArgs {
    #[arg(long)]
    c: String,
    #[arg(long, default_value_t = 0)]
    ell: u32,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.9, 0.99, 0.999])]
    s_grid: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
struct SelftestArgs {
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
}

/// Parses `c` as `p/q`, an exact decimal, or any other positive real.
pub fn parse_c(text: &str) -> Result<ReinforcementParams> {
    let t = text.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p = p.trim().parse::<u64>();
        let q = q.trim().parse::<u64>();
        return match (p, q) {
            (Ok(p), Ok(q)) => ReinforcementParams::from_ratio(p, q),
            _ => Err(Error::invalid("c", format!("cannot parse ratio {text:?}"))),
        };
    }
    if let Some(params) = decimal_ratio(t) {
        return params;
    }
    match t.parse::<f64>() {
        Ok(v) => ReinforcementParams::new(v),
        Err(_) => Err(Error::invalid("c", format!("cannot parse {text:?}"))),
    }
}

fn decimal_ratio(t: &str) -> Option<Result<ReinforcementParams>> {
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) || frac.len() > 18 {
        return None;
    }
    let den = 10u64.checked_pow(frac.len() as u32)?;
    let num = format!("{int}{frac}").parse::<u64>().ok()?;
    let g = gcd(num.max(1), den);
    Some(ReinforcementParams::from_ratio(num / g, den / g))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Formats `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci.rsplit_once('e').expect("exponent").1.parse().expect("integer exponent");
    if (-5..=16).contains(&exp) {
        format!("{:.*}", (16 - exp).max(1) as usize, v)
    } else {
        sci
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_f64(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

macro_rules! row {
    ($($v:expr),* $(,)?) => { vec![$(Cell::from($v)),*] };
}

struct Report {
    columns: &'static [&'static str],
    rows: Vec<Vec<Cell>>,
    metadata: Vec<(&'static str, Value)>,
    /// Set when a certificate was not met; the report is still written.
    failure: Option<String>,
}

impl Report {
    fn new(columns: &'static [&'static str]) -> Self {
        Self {
            columns,
            rows: Vec::new(),
            metadata: Vec::new(),
            failure: None,
        }
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = String::new();
                for (k, v) in &self.metadata {
                    let v = match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    out.push_str(&format!("# {k}: {v}\n"));
                }
                out.push_str(&self.columns.join(","));
                out.push('\n');
                for row in &self.rows {
                    let line: Vec<String> = row.iter().map(Cell::csv).collect();
                    out.push_str(&line.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let metadata: Map<String, Value> = self.metadata.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        Value::Object(self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect())
                    })
                    .collect();
                let mut doc = Map::new();
                doc.insert("metadata".into(), Value::Object(metadata));
                doc.insert("rows".into(), Value::Array(rows));
                let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("serialisable");
                s.push('\n');
                s
            }
        }
    }
}

fn usage_error(err: &Error) -> bool {
    matches!(err, Error::InvalidParameter { .. })
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I: IntoIterator<Item = String>>(argv: I) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) => n,
            Err(_) => {
                eprintln!("error: {THREADS_ENV}={v:?} is not a thread count");
                return 2;
            }
        },
        Err(_) => cli.io.threads,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return 1;
        }
    };
    let result = pool.install(|| dispatch(&cli.command));
    let mut report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return if usage_error(&e) { 2 } else { 1 };
        }
    };

    let config = serde_json::to_value(&cli.command).expect("serialisable");
    let mut metadata = vec![
        ("version", Value::from(env!("CARGO_PKG_VERSION"))),
        ("seed", seed_of(&cli.command).map_or(Value::Null, Value::from)),
        ("config", Value::from(config.to_string())),
    ];
    if !matches!(cli.command, Command::Selftest(_)) {
        metadata.push(("threads", Value::from(pool.current_num_threads())));
    }
    metadata.push(("rng", Value::from(RNG_ALGORITHM)));
    metadata.append(&mut report.metadata);
    report.metadata = metadata;

    let text = report.render(cli.io.format);
    let written = match &cli.io.output {
        Some(path) => std::fs::write(path, text.as_bytes()),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return 1;
    }
    match report.failure {
        Some(msg) => {
            eprintln!("certificate failure: {msg}");
            1
        }
        None => 0,
    }
}

fn seed_of(cmd: &Command) -> Option<u64> {
    match cmd {
        Command::Simulate(a) => Some(a.seed),
        Command::Converge(a) if a.mode == ConvergeMode::Mc => Some(a.seed),
        Command::Selftest(a) => Some(a.seed),
        _ => None,
    }
}

fn dispatch(cmd: &Command) -> Result<Report> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Exact(a) => exact_cmd(a),
        Command::Gf(a) => gf(a),
        Command::Limits(a) => limits(a),
        Command::Converge(a) => converge(a),
        Command::Blowup(a) => blowup(a),
        Command::Selftest(a) => Ok(selftest(a.seed)),
    }
}

fn simulate(a: &SimulateArgs) -> Result<Report> {
    let params = parse_c(&a.c)?;
    let est = montecarlo::estimate_moment(&params, a.n, a.ell, a.reps, SeedSpec::new(a.seed, a.stream))?;
    let mut rep = Report::new(&["n", "ell", "c", "mean", "stderr", "reps"]);
    rep.rows.push(row![est.n, est.ell, est.c, est.mean, est.stderr, est.reps]);
    Ok(rep)
}

fn horizons(n: Option<u64>, grid: &[u64]) -> Result<Vec<u64>> {
    let mut out = match n {
        Some(n) => vec![n],
        None => grid.to_vec(),
    };
    if out.is_empty() {
        return Err(Error::invalid("n", "give --n or --n-grid"));
    }
    if out.contains(&0) {
        return Err(Error::invalid("n", "horizons must be positive"));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn exact_cmd(a: &ExactArgs) -> Result<Report> {
    let params = parse_c(&a.c)?;
    let ns = horizons(a.n, &a.n_grid)?;
    let n_max = *ns.last().expect("non-empty");
    if let Some(k) = a.k {
        if a.n_grid.len() > 1 {
            return Err(Error::invalid("n_grid", "with --k give a single horizon via --n"));
        }
        let pmf = exact::first_passage_pmf(&params, k, n_max)?;
        let mut rep = Report::new(&["k", "n", "probability"]);
        for (n, &p) in pmf.pmf.iter().enumerate() {
            if p > 0.0 {
                rep.rows.push(row![k, n as u64, p]);
            }
        }
        rep.metadata.push(("remaining_mass", Value::String(fmt_f64(pmf.remaining_mass))));
        return Ok(rep);
    }
    let ells: Vec<u32> = match (a.ell_max, a.ell.is_empty()) {
        (Some(m), _) => (1..=m).collect(),
        (None, true) => vec![1],
        (None, false) => a.ell.clone(),
    };
    let ell_max = *ells.iter().max().expect("non-empty");
    if ells.contains(&0) {
        return Err(Error::invalid("ell", "moment orders must be positive"));
    }
    let table = exact::range_moments(&params, n_max, ell_max, a.eps_prune)?;
    let mut rep = Report::new(&["n", "ell", "value", "error_bound"]);
    for &n in &ns {
        for &ell in &ells {
            let r = table.get(n, ell).expect("table covers the grid");
            rep.rows.push(row![r.n, r.ell, r.value, r.error_bound]);
            if let Some(max) = a.max_error {
                if r.error_bound > max && rep.failure.is_none() {
                    rep.failure = Some(format!("error bound {:e} at n={n}, ell={ell} exceeds {max:e}", r.error_bound));
                }
            }
        }
    }
    rep.metadata.push(("rational", Value::Bool(table.rational)));
    rep.metadata.push(("pruned_mass", Value::String(fmt_f64(table.pruned_mass))));
    Ok(rep)
}

fn gf(a: &GfArgs) -> Result<Report> {
    let params = parse_c(&a.c)?;
    let grid = match a.s {
        Some(s) => vec![s],
        None => a.s_grid.clone(),
    };
    if grid.is_empty() {
        return Err(Error::invalid("s", "give --s or --s-grid"));
    }
    if a.x.is_none() && a.k.is_none() && a.ell.is_none() {
        return Err(Error::invalid("x", "give at least one of --x, --k, --ell"));
    }
    let mut rep = Report::new(&["quantity", "index", "s", "value", "tail_bound"]);
    for &s in &grid {
        let point = EvalPoint::new(s)?;
        if let Some(x) = a.x {
            if x == 0 {
                return Err(Error::invalid("x", "g and G are defined for x ≥ 1"));
            }
            rep.rows.push(row!["g", x, s, genfun::g(x, point), 0.0]);
            rep.rows.push(row!["G", x, s, genfun::big_g(x, point, &params), 0.0]);
        }
        if let Some(k) = a.k {
            rep.rows.push(row!["s_k", k, s, genfun::s_k_gf(k, point, &params)?, 0.0]);
        }
        if let Some(ell) = a.ell {
            let h = genfun::h_ell(ell, point, &params, a.rel_tol)?;
            rep.rows.push(row!["H", ell, s, h.value, h.tail_bound]);
        }
    }
    Ok(rep)
}

fn limits(a: &LimitsArgs) -> Result<Report> {
    let params = parse_c(&a.c)?;
    if a.ell_max == 0 {
        return Err(Error::invalid("ell_max", "must be at least 1"));
    }
    let mut rep = Report::new(&["ell", "c", "J", "K", "M", "quad_error"]);
    for ell in 1..=a.ell_max {
        let lc = LimitConstants::compute(&params, ell, a.tol)?;
        rep.rows.push(row![lc.ell, lc.c, lc.j, lc.k, lc.m, lc.quad_error]);
    }
    Ok(rep)
}

fn converge(a: &ConvergeArgs) -> Result<Report> {
    let params = parse_c(&a.c)?;
    let mode = match a.mode {
        ConvergeMode::Exact => StudyMode::Exact { eps_prune: a.eps_prune },
        ConvergeMode::Mc => StudyMode::MonteCarlo {
            reps: a.reps,
            seed: SeedSpec::new(a.seed, a.stream),
        },
    };
    let rows = montecarlo::convergence_study(&params, &a.n_grid, a.ell, mode)?;
    let mut rep = Report::new(&["n", "ell", "c", "estimate", "stderr", "limit", "ratio", "source"]);
    for r in rows {
        if a.mode == ConvergeMode::Exact && r.stderr > a.max_error && rep.failure.is_none() {
            rep.failure = Some(format!("error bound {:e} at n={} exceeds {:e}", r.stderr, r.n, a.max_error));
        }
        rep.rows.push(row![r.n, r.ell, r.c, r.estimate, r.stderr, r.limit, r.ratio, r.source.to_string()]);
    }
    Ok(rep)
}

fn blowup(a: &BlowupArgs) -> Result<Report> {
    let params = parse_c(&a.c)?;
    let rows = asymptotics::blowup_check(a.ell, &params, &a.s_grid)?;
    let mut rep = Report::new(&["s", "ell", "c", "h", "tail_bound", "terms", "ratio"]);
    for r in rows {
        rep.rows.push(row![r.s, a.ell, params.c(), r.h, r.tail_bound, r.terms, r.ratio]);
    }
    Ok(rep)
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn selftest(seed: u64) -> Report {
    let one = ReinforcementParams::from_ratio(1, 1).expect("valid");
    let checks = vec![
        check("j1_is_half_pi", || {
            let v = asymptotics::j_ell(1.0, 1, 1e-12)?;
            Ok(((v - std::f64::consts::FRAC_PI_2).abs() < 1e-10, fmt_f64(v)))
        }),
        check("j2_is_twice_catalan", || {
            let v = asymptotics::j_ell(1.0, 2, 1e-12)?;
            let g = asymptotics::catalan(1e-12)?;
            Ok(((v - 2.0 * g).abs() < 1e-10, fmt_f64(v)))
        }),
        check("dual_forms_agree", || {
            let c2 = ReinforcementParams::new(2.0)?;
            let mut worst: f64 = 0.0;
            for &s in &[0.1, 0.5, 0.9, 0.99, 0.9999] {
                let p = EvalPoint::new(s)?;
                for x in [1, 2, 5, 20, 100, 1000] {
                    worst = worst.max((genfun::g(x, p) / genfun::g_dual(x, p) - 1.0).abs());
                    worst = worst.max((genfun::big_g(x, p, &c2) / genfun::big_g_dual(x, p, &c2) - 1.0).abs());
                }
            }
            Ok((worst < 1e-12, fmt_f64(worst)))
        }),
        check("s2_gf_is_9_over_41", || {
            let v = genfun::s_k_gf(2, EvalPoint::new(0.6)?, &one)?;
            Ok(((v - 9.0 / 41.0).abs() < 1e-14, fmt_f64(v)))
        }),
        check("passage_pmf_matches_gf", || {
            let p = EvalPoint::new(0.5)?;
            let mut worst = f64::NEG_INFINITY;
            for k in 2..=5 {
                let pmf = exact::first_passage_pmf(&one, k, 64)?;
                let diff = (pmf.generating_function(0.5) - genfun::s_k_gf(k, p, &one)?).abs();
                worst = worst.max(diff - 0.5f64.powi(66) - pmf.remaining_mass);
            }
            Ok((worst <= 0.0, fmt_f64(worst)))
        }),
        check("rational_mass_is_one", || {
            let mut evo = RationalEvolution::new(&ReinforcementParams::from_ratio(1, 2)?)?;
            for _ in 0..30 {
                evo.step();
            }
            let total = evo.total_mass();
            Ok((total == num_rational::BigRational::from_integer(1.into()), total.to_string()))
        }),
        check("small_range_means", || {
            let mut ok = true;
            let mut detail = Vec::new();
            for (num, den) in [(1, 2), (1, 1), (2, 1)] {
                let p = ReinforcementParams::from_ratio(num, den)?;
                let t = exact::range_moments(&p, 3, 1, exact::DEFAULT_EPS_PRUNE)?;
                let r2 = t.get(2, 1).expect("n=2").value;
                ok &= (r2 - (1.0 + 1.0 / (1.0 + p.c()))).abs() < 1e-15;
                detail.push(fmt_f64(r2));
            }
            let r3 = exact::range_moments(&one, 3, 1, exact::DEFAULT_EPS_PRUNE)?.get(3, 1).expect("n=3").value;
            ok &= r3 == 1.75;
            detail.push(fmt_f64(r3));
            Ok((ok, detail.join(" ")))
        }),
        check("float_dp_matches_rational", || {
            let q = ReinforcementParams::from_ratio(3, 2)?;
            let f = ReinforcementParams::new(1.5)?;
            let exact_t = exact::range_moments(&q, 200, 2, exact::DEFAULT_EPS_PRUNE)?;
            let float_t = exact::range_moments(&f, 200, 2, exact::DEFAULT_EPS_PRUNE)?;
            let mut worst: f64 = 0.0;
            for (a, b) in exact_t.rows.iter().zip(&float_t.rows) {
                worst = worst.max((a.value - b.value).abs() / a.value - b.error_bound / a.value);
            }
            Ok((worst < 1e-12, fmt_f64(worst)))
        }),
        check("mc_matches_exact", || {
            let c2 = ReinforcementParams::new(2.0)?;
            let est = montecarlo::estimate_moment(&c2, 128, 1, 40_000, SeedSpec::new(seed, 0))?;
            let dp = exact::range_moments(&c2, 128, 1, exact::DEFAULT_EPS_PRUNE)?.get(128, 1).expect("n").value;
            let target = dp / 128f64.sqrt();
            let z = (est.mean - target) / est.stderr;
            Ok((z.abs() < 4.0, format!("mean={} stderr={} z={}", fmt_f64(est.mean), fmt_f64(est.stderr), fmt_f64(z))))
        }),
        check("passage_samplers_fit", || {
            let p = ReinforcementParams::new(0.5)?;
            let cmp = montecarlo::compare_first_passage(&p, 4, 20_000, SeedSpec::new(seed, 1 << 32), walk::DEFAULT_MAX_STEPS)?;
            let ok = cmp.direct.p_value > 1e-3 && cmp.decomposition.p_value > 1e-3 && cmp.between_modes.p_value > 1e-3;
            Ok((
                ok,
                format!(
                    "direct_p={} decomposition_p={} between_p={}",
                    fmt_f64(cmp.direct.p_value),
                    fmt_f64(cmp.decomposition.p_value),
                    fmt_f64(cmp.between_modes.p_value)
                ),
            ))
        }),
        check("blowup_trend", || {
            let rows = asymptotics::blowup_check(0, &one, &[0.9, 0.99, 0.999])?;
            let gaps: Vec<f64> = rows.iter().map(|r| (r.ratio - 1.0).abs()).collect();
            let ok = gaps.windows(2).all(|w| w[1] < w[0]) && gaps[2] < 0.1;
            Ok((ok, fmt_f64(rows[2].ratio)))
        }),
    ];
    let mut rep = Report::new(&["check", "status", "detail"]);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    for c in checks {
        rep.rows.push(row![c.name, if c.pass { "pass" } else { "fail" }, c.detail]);
    }
    if !failed.is_empty() {
        rep.failure = Some(format!("selftest checks failed: {}", failed.join(", ")));
    }
    rep
}
