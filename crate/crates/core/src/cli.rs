//! The `bruhat` command line: configuration, run manifests, versioned CSV
//! and the experiment pipelines.
//!
//! Data goes to files or standard output; logs and progress go to standard
//! error. Settings resolve as built-in defaults, then the TOML file given by
//! `--config`, then command-line flags (flags win).

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::dist::{self, bernoulli_ratio, count_cap, GofReport, HyperGeomParams};
use crate::error::Error;
use crate::estimate::{
    self, fit_scaling, psi_fit, EstimateResult, FitOptions, SheetEstimate, SheetMethod, SheetMode, NAIVE_MC_CAP,
};
use crate::fkg::{corner_events_equal, fkg_sweep, CORNER_CAP};
use crate::order::{self, exact_comparability_count, exact_count_by_closure};
use crate::parallel::Executor;
use crate::perm::Permutation;
use crate::rng::StreamKey;
use crate::zproc::{self, z_table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config or input files: exit 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// A checked mathematical invariant failed: exit 3.
    #[error("invariant violation: {0}")]
    Invariant(String),
    /// Naive Monte Carlo refused outside its feasible range: exit 4.
    #[error("LOW-COUNT refusal: {0}")]
    LowCount(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::LowCount(_) => 4,
            CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Degenerate(_) | Error::Infeasible(_) => CliError::Failed(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Failed(format!("json: {e}"))
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "bruhat", version, about = "Strong Bruhat comparability of random permutations")]
pub struct Cli {
    /// TOML experiment config; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Run naive Monte Carlo beyond its feasible range.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compare two permutations.
    Check(CheckArgs),
    /// Exact count of comparable pairs in S_n.
    Exact(ExactArgs),
    /// Minimum of Z for a pair of permutations.
    Zmin(ZminArgs),
    /// Rectangle and strip maximal deviations.
    Chainstat(ChainstatArgs),
    /// Hypergeometric pmf, moments or sampler check.
    Hyper(HyperArgs),
    /// Corner-count pmf ratio against its Bernoulli model.
    Bernratio(BernratioArgs),
    /// Monte Carlo estimates of P(π ≤ τ).
    Mc(McArgs),
    /// Scaling fit of Monte Carlo estimates.
    Fit(FitArgs),
    /// Gaussian or sparse sheet persistence.
    Gauss(GaussArgs),
    /// Correlation row sums for geometric sampling of the sheet.
    Lishao(LishaoArgs),
    /// Exact positive-correlation checks.
    Fkg(FkgArgs),
    /// Monte Carlo over an n-grid followed by the scaling fit.
    PipelineScaling(PipelineArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OrderKind {
    Strong,
    Weak,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long)]
    pub pi: String,
    #[arg(long)]
    pub tau: String,
    #[arg(long, value_enum, default_value = "strong")]
    pub order: OrderKind,
}

#[derive(Args, Debug)]
pub struct ExactArgs {
    #[arg(long)]
    pub n: usize,
    /// Allow n = 7 (about 2.5·10⁷ pairs).
    #[arg(long)]
    pub allow_seven: bool,
}

#[derive(Args, Debug)]
pub struct ZminArgs {
    #[arg(long)]
    pub pi: String,
    #[arg(long)]
    pub tau: String,
}

#[derive(Args, Debug)]
pub struct ChainstatArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub x: usize,
    #[arg(long)]
    pub y: usize,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HyperArgs {
    /// Population size.
    #[arg(long = "N")]
    pub population: u64,
    /// Number of draws.
    #[arg(long = "B")]
    pub draws: u64,
    /// Number of successes in the population.
    #[arg(long = "A")]
    pub successes: u64,
    #[arg(long, conflicts_with_all = ["moments", "sample"])]
    pub k: Option<u64>,
    #[arg(long, conflicts_with = "sample")]
    pub moments: bool,
    /// Draw this many samples and compare with the pmf.
    #[arg(long)]
    pub sample: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct BernratioArgs {
    #[arg(long)]
    pub n: u64,
    /// Defaults to every k ≤ n^{1/5}.
    #[arg(long)]
    pub k: Option<u64>,
}

#[derive(Args, Debug)]
pub struct McArgs {
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Keep sampling in fixed rounds until this many successes.
    #[arg(long)]
    pub min_successes: Option<u64>,
    #[arg(long)]
    pub max_trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep points with fewer than 20 successes.
    #[arg(long)]
    pub include_low_count: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeKind {
    Gaussian,
    Zeta,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodKind {
    Naive,
    Splitting,
}

#[derive(Args, Debug)]
pub struct GaussArgs {
    /// Comma-separated grid sides.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub mode: ModeKind,
    /// Zeta sparsity; defaults to 1/m².
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_enum, default_value = "naive")]
    pub method: MethodKind,
    #[arg(long, default_value_t = 1000)]
    pub particles: usize,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the ψ fit (JSON); logged otherwise.
    #[arg(long)]
    pub fit_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LishaoArgs {
    #[arg(long, default_value_t = 400)]
    pub rho: u64,
    #[arg(long, default_value_t = 50)]
    pub index_range: u64,
}

#[derive(Args, Debug)]
pub struct FkgArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub pairs: u64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub min_successes: Option<u64>,
    #[arg(long)]
    pub max_trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Keys accepted in the TOML config file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub trials: Option<u64>,
    pub min_successes: Option<u64>,
    pub max_trials: Option<u64>,
    pub c_log: Option<f64>,
    pub sheet_threshold: Option<f64>,
    pub sheet_grid: Option<Vec<usize>>,
    pub out_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Resolved settings of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub workers: usize,
    pub n_grid: Vec<usize>,
    pub trials: u64,
    pub min_successes: Option<u64>,
    pub max_trials: u64,
    pub c_log: f64,
    pub sheet_threshold: f64,
    pub sheet_grid: Vec<usize>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            workers: Executor::available().workers(),
            n_grid: vec![4, 6, 8, 12, 16, 24, 32, 48, 64],
            trials: 1_000_000,
            min_successes: None,
            max_trials: 1 << 32,
            c_log: 2.0,
            sheet_threshold: 1.0,
            sheet_grid: vec![16, 64, 256, 1024],
            out_dir: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    pub fn merge_file(mut self, f: ConfigFile) -> Self {
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = f.$field { self.$field = v; } )* };
        }
        take!(seed, workers, n_grid, trials, max_trials, c_log, sheet_threshold, sheet_grid, out_dir);
        if f.min_successes.is_some() {
            self.min_successes = f.min_successes;
        }
        self
    }

    pub fn validate(&self) -> CliResult {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.workers == 0 {
            return bad("workers must be positive".into());
        }
        if self.trials == 0 || self.max_trials == 0 {
            return bad("trial budgets must be positive".into());
        }
        if self.min_successes == Some(0) {
            return bad("min_successes must be positive".into());
        }
        if !(self.c_log >= 0.0) || !(self.sheet_threshold >= 0.0) {
            return bad("thresholds must be non-negative".into());
        }
        for (name, grid) in [("n_grid", &self.n_grid), ("sheet_grid", &self.sheet_grid)] {
            if grid.is_empty() || grid[0] == 0 {
                return bad(format!("{name} must be non-empty with positive entries"));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("{name} must be strictly increasing, got {grid:?}"));
            }
        }
        Ok(())
    }
}

/// Provenance record written next to data files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub subcommand: String,
    pub seed: u64,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub workers: usize,
    pub params: serde_json::Value,
    /// Output path → SHA-256 of its bytes.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Versioned CSV layouts: a `#schema=` line, then a fixed header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schema {
    Mc,
    Sheet,
    Chainstat,
}

impl Schema {
    pub fn tag(self) -> &'static str {
        match self {
            Schema::Mc => "mc/1",
            Schema::Sheet => "sheet/1",
            Schema::Chainstat => "chainstat/1",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Schema::Mc => &["n", "trials", "successes", "p_hat", "ci_low", "ci_high", "seed"],
            Schema::Sheet => &[
                "m", "threshold", "mode", "method", "p_hat", "ln_se", "ci_low", "ci_high", "successes", "seed",
            ],
            Schema::Chainstat => &[
                "n", "x", "y", "statistic", "estimate", "stderr", "normalizer", "ratio", "trials", "seed",
            ],
        }
    }
}

/// Serializes rows under `schema`; the bytes depend only on the rows.
pub fn csv_bytes<T: Serialize>(schema: Schema, rows: &[T], note: &str) -> CliResult<Vec<u8>> {
    let mut out = format!("#schema={} version={VERSION}{note}\n", schema.tag()).into_bytes();
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(schema.columns())?;
    for r in rows {
        w.serialize(r)?;
    }
    out.extend(w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?);
    Ok(out)
}

/// Reads rows written by [`csv_bytes`]; a different schema or header is an error.
pub fn read_csv<T: for<'de> Deserialize<'de>>(schema: Schema, bytes: &[u8]) -> CliResult<Vec<T>> {
    let mut lines = bytes.lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    let tag = first
        .strip_prefix("#schema=")
        .and_then(|rest| rest.split_whitespace().next())
        .ok_or_else(|| CliError::Config("missing #schema= line".into()))?;
    if tag != schema.tag() {
        return Err(CliError::Config(format!("schema mismatch: expected {}, found {tag}", schema.tag())));
    }
    let body = &bytes[first.len() + 1.min(bytes.len() - first.len())..];
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != schema.columns() {
        return Err(CliError::Config(format!(
            "header mismatch for {}: expected {:?}, found {header:?}",
            schema.tag(),
            schema.columns()
        )));
    }
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

pub fn read_estimates(path: &Path) -> CliResult<Vec<EstimateResult>> {
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    read_csv(Schema::Mc, &bytes)
}

/// One row of the sheet CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SheetRow {
    pub m: usize,
    pub threshold: f64,
    pub mode: String,
    pub method: String,
    pub p_hat: f64,
    pub ln_se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub successes: u64,
    pub seed: u64,
}

impl From<&SheetEstimate> for SheetRow {
    fn from(e: &SheetEstimate) -> Self {
        Self {
            m: e.m,
            threshold: e.threshold,
            mode: e.mode.label(),
            method: match e.method {
                SheetMethod::Naive { trials } => format!("naive(trials={trials})"),
                SheetMethod::Splitting { particles, runs } => format!("splitting(particles={particles},runs={runs})"),
            },
            p_hat: e.p_hat,
            ln_se: e.ln_se,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            successes: e.successes,
            seed: e.seed,
        }
    }
}

/// One row of the chaining-statistics CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainRow {
    pub n: usize,
    pub x: usize,
    pub y: usize,
    pub statistic: String,
    pub estimate: f64,
    pub stderr: f64,
    pub normalizer: f64,
    pub ratio: f64,
    pub trials: u64,
    pub seed: u64,
}

/// Both chaining statistics at one `(n, x, y)`.
pub fn chainstat_rows(n: usize, x: usize, y: usize, trials: u64, seed: u64, exec: &Executor) -> CliResult<Vec<ChainRow>> {
    let key = StreamKey::new(seed);
    let rect = zproc::max_rect_stat(key, n, x, y, trials, exec)?;
    let strip = zproc::max_strip_stat(key, n, x, y, trials, exec)?;
    let rn = zproc::rect_normalizer(n, x, y);
    let sn = zproc::strip_normalizer(n, x, y);
    Ok(vec![
        ChainRow {
            n,
            x,
            y,
            statistic: "rect".into(),
            estimate: rect.mean,
            stderr: rect.std_error(),
            normalizer: rn,
            ratio: rect.mean / rn,
            trials,
            seed,
        },
        ChainRow {
            n,
            x,
            y,
            statistic: "strip".into(),
            estimate: strip.mean,
            stderr: strip.std_error(),
            normalizer: sn,
            ratio: strip.mean / sn,
            trials,
            seed,
        },
    ])
}

/// Collects outputs and writes the manifest.
struct Run {
    command_line: Vec<String>,
    subcommand: &'static str,
    started: String,
    workers: usize,
    outputs: BTreeMap<String, String>,
}

impl Run {
    fn new(subcommand: &'static str, workers: usize) -> Self {
        Self {
            command_line: std::env::args().collect(),
            subcommand,
            started: now(),
            workers,
            outputs: BTreeMap::new(),
        }
    }

    /// Writes to `path`, or to standard output when `path` is `None`.
    fn emit(&mut self, path: Option<&Path>, bytes: &[u8]) -> CliResult {
        match path {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir)?;
                }
                fs::write(p, bytes)?;
                self.outputs.insert(p.display().to_string(), sha256_hex(bytes));
                tracing::info!(path = %p.display(), bytes = bytes.len(), "wrote");
            }
            None => io::stdout().lock().write_all(bytes)?,
        }
        Ok(())
    }

    /// Writes `manifest_path` if any file output was produced.
    fn finish(self, manifest_path: Option<PathBuf>, seed: u64, params: serde_json::Value) -> CliResult {
        let Some(path) = manifest_path else { return Ok(()) };
        if self.outputs.is_empty() {
            return Ok(());
        }
        let manifest = RunManifest {
            command_line: self.command_line,
            subcommand: self.subcommand.into(),
            seed,
            version: VERSION.into(),
            started: self.started,
            finished: now(),
            workers: self.workers,
            params,
            outputs: self.outputs,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(&path, bytes)?;
        tracing::info!(path = %path.display(), "wrote manifest");
        Ok(())
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

fn manifest_for(path: &Option<PathBuf>) -> Option<PathBuf> {
    path.as_ref().map(|p| {
        let mut s = p.clone().into_os_string();
        s.push(".manifest.json");
        PathBuf::from(s)
    })
}

fn print_json(v: &serde_json::Value) -> CliResult {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn parse_perm(s: &str) -> CliResult<Permutation> {
    s.parse::<Permutation>().map_err(CliError::from)
}

fn refuse_large(ns: &[usize], force: bool) -> CliResult {
    if let Some(&n) = ns.iter().find(|&&n| n > NAIVE_MC_CAP) {
        if !force {
            return Err(CliError::LowCount(format!(
                "n = {n} exceeds {NAIVE_MC_CAP}; naive Monte Carlo sees too few successes there (pass --force to run anyway)"
            )));
        }
        tracing::warn!(n, "running naive Monte Carlo beyond its feasible range");
    }
    Ok(())
}

/// Estimates over a grid, adaptively when `min_successes` is set.
pub fn comparability_grid(cfg: &ExperimentConfig, exec: &Executor) -> CliResult<Vec<EstimateResult>> {
    cfg.n_grid
        .iter()
        .map(|&n| {
            let r = match cfg.min_successes {
                Some(k) => estimate::estimate_comparability_until(n, k, cfg.max_trials, cfg.seed, exec)?,
                None => estimate::estimate_comparability(n, cfg.trials, cfg.seed, exec)?,
            };
            if !(0.0 <= r.ci_low && r.ci_low <= r.p_hat && r.p_hat <= r.ci_high && r.ci_high <= 1.0) {
                return Err(CliError::Invariant(format!("interval out of order at n={n}: {r:?}")));
            }
            if r.low_count() {
                tracing::warn!(n, successes = r.successes, "LOW-COUNT: fewer than 20 successes");
            }
            tracing::info!(n, p_hat = r.p_hat, successes = r.successes, trials = r.trials, secs = r.wall_time, "estimate");
            Ok(r)
        })
        .collect()
}

/// The fit document; `status` is `UNDERDETERMINED` when fewer than four
/// usable sizes remain.
pub fn fit_document(results: &[EstimateResult], opts: &FitOptions) -> CliResult<serde_json::Value> {
    let seeds: Vec<u64> = results.iter().map(|r| r.seed).collect();
    match fit_scaling(results, opts) {
        Ok(fit) => Ok(json!({
            "schema": "fit/1",
            "version": VERSION,
            "status": "ok",
            "model": "-ln p = alpha (ln n)^2 + beta ln n + gamma",
            "fit": fit,
            "points": results.len(),
            "seeds": seeds,
        })),
        Err(Error::Degenerate(msg)) => {
            tracing::warn!("{msg}");
            Ok(json!({
                "schema": "fit/1",
                "version": VERSION,
                "status": "UNDERDETERMINED",
                "reason": msg,
                "fit": null,
                "points": results.len(),
                "seeds": seeds,
            }))
        }
        Err(e) => Err(e.into()),
    }
}

fn resolve_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        cfg = cfg.merge_file(ConfigFile::load(path)?);
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

/// Parses arguments, runs, and maps failures to exit statuses.
pub fn main_entry() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .with_ansi(io::stderr().is_terminal())
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: &Cli) -> CliResult {
    let mut cfg = resolve_config(cli)?;
    macro_rules! set {
        ($($src:expr => $dst:ident),*) => { $( if let Some(v) = $src.clone() { cfg.$dst = v; } )* };
    }
    match &cli.command {
        Command::Check(a) => {
            let (p, t) = (parse_perm(&a.pi)?, parse_perm(&a.tau)?);
            let doc = match a.order {
                OrderKind::Strong => {
                    let v = order::is_leq_strong(&p, &t)?;
                    json!({"order": "strong", "leq": v.leq, "witness": v.witness})
                }
                OrderKind::Weak => json!({"order": "weak", "leq": order::is_leq_weak(&p, &t)?, "witness": null}),
            };
            print_json(&doc)
        }
        Command::Exact(a) => {
            cfg.validate()?;
            let exec = Executor::new(cfg.workers);
            let c = exact_comparability_count(a.n, a.allow_seven, &exec)?;
            if a.n <= 5 {
                let closure = exact_count_by_closure(a.n)?;
                if closure != c {
                    return Err(CliError::Invariant(format!("criterion scan {c:?} != cover closure {closure:?}")));
                }
            }
            print_json(&json!({
                "n": c.n,
                "comparable_pairs": c.comparable_pairs,
                "total_pairs": c.total_pairs,
                "probability": c.ratio().to_string(),
                "probability_f64": c.probability(),
            }))
        }
        Command::Zmin(a) => {
            let (p, t) = (parse_perm(&a.pi)?, parse_perm(&a.tau)?);
            let z = z_table(&p, &t)?;
            if !z.check_invariants() {
                return Err(CliError::Invariant("Z table boundary or increment invariant failed".into()));
            }
            let (min, argmin) = z.min_with_argmin();
            print_json(&json!({"min": min, "argmin": argmin, "comparable": min >= 0}))
        }
        Command::Chainstat(a) => {
            set!(a.trials => trials, a.seed => seed);
            if a.trials.is_none() && cli.config.is_none() {
                cfg.trials = 1000;
            }
            cfg.validate()?;
            let exec = Executor::new(cfg.workers);
            let mut run = Run::new("chainstat", cfg.workers);
            let rows = chainstat_rows(a.n, a.x, a.y, cfg.trials, cfg.seed, &exec)?;
            run.emit(a.out.as_deref(), &csv_bytes(Schema::Chainstat, &rows, "")?)?;
            run.finish(manifest_for(&a.out), cfg.seed, json!({"n": a.n, "x": a.x, "y": a.y, "trials": cfg.trials}))
        }
        Command::Hyper(a) => {
            let law = HyperGeomParams::new(a.population, a.draws, a.successes)?;
            let (lo, hi) = law.support();
            let doc = if let Some(k) = a.k {
                json!({"law": law, "k": k, "pmf": law.pmf_exact(k).to_string(), "pmf_f64": law.pmf(k)})
            } else if a.moments {
                let m = law.moments()?;
                json!({
                    "law": law,
                    "mean": m.mean.to_string(), "mean_f64": m.mean_f64(),
                    "variance": m.variance.to_string(), "variance_f64": m.variance_f64(),
                })
            } else if let Some(trials) = a.sample {
                cfg.validate()?;
                let seed = a.seed.unwrap_or(cfg.seed);
                let exec = Executor::new(cfg.workers);
                let key = StreamKey::new(seed).domain("hyper-sample");
                let values = exec.map_trials(trials, |t| law.sample(&mut key.trial(t)));
                let report = GofReport::compare(&values, &law);
                json!({"law": law, "seed": seed, "report": report})
            } else {
                json!({"law": law, "support": [lo, hi], "mean_f64": law.mean_f64(), "pmf": law.pmf_table()})
            };
            print_json(&doc)
        }
        Command::Bernratio(a) => {
            let ks: Vec<u64> = match a.k {
                Some(k) => vec![k],
                None => (0..=count_cap(a.n)).collect(),
            };
            let rows = ks.iter().map(|&k| bernoulli_ratio(a.n, k)).collect::<Result<Vec<_>, _>>()?;
            print_json(&json!({"n": a.n, "side": dist::corner_side(a.n), "ratios": rows}))
        }
        Command::Mc(a) => {
            set!(a.n => n_grid, a.trials => trials, a.seed => seed, a.max_trials => max_trials);
            if a.min_successes.is_some() {
                cfg.min_successes = a.min_successes;
            }
            cfg.validate()?;
            refuse_large(&cfg.n_grid, cli.force)?;
            let exec = Executor::new(cfg.workers);
            let mut run = Run::new("mc", cfg.workers);
            let results = comparability_grid(&cfg, &exec)?;
            run.emit(a.out.as_deref(), &csv_bytes(Schema::Mc, &results, "")?)?;
            run.finish(manifest_for(&a.out), cfg.seed, serde_json::to_value(&cfg)?)
        }
        Command::Fit(a) => {
            let results = read_estimates(&a.input)?;
            let doc = fit_document(&results, &FitOptions { include_low_count: a.include_low_count })?;
            let mut run = Run::new("fit", cfg.workers);
            let mut bytes = serde_json::to_vec_pretty(&doc)?;
            bytes.push(b'\n');
            run.emit(a.out.as_deref(), &bytes)?;
            let seed = results.first().map_or(0, |r| r.seed);
            run.finish(manifest_for(&a.out), seed, json!({"input": a.input, "include_low_count": a.include_low_count}))
        }
        Command::Gauss(a) => {
            set!(a.grid => sheet_grid, a.threshold => sheet_threshold, a.trials => trials, a.seed => seed);
            cfg.validate()?;
            let exec = Executor::new(cfg.workers);
            let mut run = Run::new("gauss", cfg.workers);
            let mut estimates = Vec::new();
            for &m in &cfg.sheet_grid {
                let mode = match a.mode {
                    ModeKind::Gaussian => SheetMode::Gaussian,
                    ModeKind::Zeta => a.p.map_or_else(|| SheetMode::zeta_default(m), |p| SheetMode::Zeta { p }),
                };
                let method = match a.method {
                    MethodKind::Naive => SheetMethod::Naive { trials: cfg.trials },
                    MethodKind::Splitting => SheetMethod::Splitting { particles: a.particles, runs: a.runs },
                };
                let e = estimate::sheet_estimate(m, cfg.sheet_threshold, method, cfg.seed, mode, &exec)?;
                tracing::info!(m, p_hat = e.p_hat, successes = e.successes, secs = e.wall_time, "sheet");
                estimates.push(e);
            }
            let rows: Vec<SheetRow> = estimates.iter().map(SheetRow::from).collect();
            let note = match a.mode {
                ModeKind::Gaussian => "",
                ModeKind::Zeta => " normalization=matched-variance",
            };
            run.emit(a.out.as_deref(), &csv_bytes(Schema::Sheet, &rows, note)?)?;
            let fit = match psi_fit(&estimates) {
                Ok(f) => json!({"schema": "psi/1", "version": VERSION, "status": "ok", "fit": f}),
                Err(Error::Degenerate(msg)) => {
                    json!({"schema": "psi/1", "version": VERSION, "status": "UNDERDETERMINED", "reason": msg})
                }
                Err(e) => return Err(e.into()),
            };
            match &a.fit_out {
                Some(p) => {
                    let mut bytes = serde_json::to_vec_pretty(&fit)?;
                    bytes.push(b'\n');
                    run.emit(Some(p), &bytes)?
                }
                None => tracing::info!("psi fit: {fit}"),
            }
            run.finish(manifest_for(&a.out), cfg.seed, json!({"config": cfg, "mode": format!("{:?}", a.mode), "method": format!("{:?}", a.method), "particles": a.particles, "runs": a.runs, "p": a.p}))
        }
        Command::Lishao(a) => {
            let l = estimate::li_shao_sum(a.rho, a.index_range)?;
            print_json(&json!({
                "rho": l.rho,
                "index_range": l.index_range,
                "supremum_over_ij": l.supremum_over_ij,
                "closed_form": l.closed_form,
                "closed_form_exact": l.closed_form_exact.map(|(p, q)| format!("{p}/{q}")),
                "bound_satisfied": l.bound_satisfied,
            }))
        }
        Command::Fkg(a) => {
            cfg.validate()?;
            let seed = a.seed.unwrap_or(cfg.seed);
            let exec = Executor::new(cfg.workers);
            let sweep = fkg_sweep(a.n, a.pairs, seed, &exec)?;
            let mut out = io::stdout().lock();
            let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
            writeln!(out, "{:<34} {:>10}  {}", "check", "result", "detail")?;
            writeln!(
                out,
                "{:<34} {:>10}  {} pairs, {} violations",
                "P(A∩B) >= P(A)P(B), up-sets",
                mark(sweep.violations == 0),
                sweep.pairs,
                sweep.violations
            )?;
            writeln!(
                out,
                "{:<34} {:>10}  {} failures",
                "complement identity",
                mark(sweep.complement_failures == 0),
                sweep.complement_failures
            )?;
            let mut failed = sweep.violations + sweep.complement_failures > 0;
            if a.n <= CORNER_CAP {
                let c = corner_events_equal(a.n, &exec)?;
                let probs: Vec<String> = c.probabilities.iter().map(ToString::to_string).collect();
                writeln!(out, "{:<34} {:>10}  {}", "corner events equal", mark(c.all_equal()), probs.join(", "))?;
                writeln!(
                    out,
                    "{:<34} {:>10}  P(π≤τ) = {}",
                    "P(π≤τ) >= Π P(E_j)",
                    mark(c.product_bound_holds()),
                    c.comparable
                )?;
                failed |= !c.all_equal() || !c.product_bound_holds();
            }
            let (idx, worst) = &sweep.extremal;
            writeln!(out, "extremal pair #{idx}: lhs = {}, rhs = {}, lhs - rhs = {}", worst.lhs, worst.rhs, worst.margin())?;
            writeln!(out, "  A = {:?}", sweep.extremal_sets.0)?;
            writeln!(out, "  B = {:?}", sweep.extremal_sets.1)?;
            if failed {
                return Err(CliError::Invariant("correlation checks failed".into()));
            }
            Ok(())
        }
        Command::PipelineScaling(a) => {
            set!(a.n => n_grid, a.trials => trials, a.seed => seed, a.max_trials => max_trials, a.out_dir => out_dir);
            if a.min_successes.is_some() {
                cfg.min_successes = a.min_successes;
            }
            cfg.validate()?;
            refuse_large(&cfg.n_grid, cli.force)?;
            let exec = Executor::new(cfg.workers);
            let mut run = Run::new("pipeline-scaling", cfg.workers);
            let results = comparability_grid(&cfg, &exec)?;
            let csv_path = cfg.out_dir.join("results.csv");
            run.emit(Some(&csv_path), &csv_bytes(Schema::Mc, &results, "")?)?;
            let doc = fit_document(&results, &FitOptions::default())?;
            let mut bytes = serde_json::to_vec_pretty(&doc)?;
            bytes.push(b'\n');
            run.emit(Some(&cfg.out_dir.join("fit.json")), &bytes)?;
            print_summary(&results, &doc)?;
            run.finish(Some(cfg.out_dir.join("manifest.json")), cfg.seed, serde_json::to_value(&cfg)?)
        }
    }
}

fn print_summary(results: &[EstimateResult], doc: &serde_json::Value) -> CliResult {
    let mut out = io::stdout().lock();
    writeln!(out, "{:>6} {:>12} {:>10} {:>12} {:>24}", "n", "trials", "successes", "p_hat", "95% CI")?;
    for r in results {
        let flag = if r.low_count() { "  LOW-COUNT" } else { "" };
        writeln!(
            out,
            "{:>6} {:>12} {:>10} {:>12.4e} [{:.4e}, {:.4e}]{flag}",
            r.n, r.trials, r.successes, r.p_hat, r.ci_low, r.ci_high
        )?;
    }
    match doc["status"].as_str() {
        Some("ok") => {
            let f = &doc["fit"];
            writeln!(
                out,
                "fit: -ln p = {:.4} (ln n)^2 + {:.4} ln n + {:.4}   (alpha se {:.4}, r^2 {:.5})",
                f["alpha"].as_f64().unwrap_or(f64::NAN),
                f["beta"].as_f64().unwrap_or(f64::NAN),
                f["gamma"].as_f64().unwrap_or(f64::NAN),
                f["alpha_se"].as_f64().unwrap_or(f64::NAN),
                f["r_squared"].as_f64().unwrap_or(f64::NAN),
            )?;
            writeln!(
                out,
                "polynomial submodel: -ln p = {:.4} ln n + {:.4}; AICc full {} vs polynomial {} -> {}",
                f["sub_beta"].as_f64().unwrap_or(f64::NAN),
                f["sub_gamma"].as_f64().unwrap_or(f64::NAN),
                f["aicc_full"],
                f["aicc_sub"],
                f["preferred"].as_str().unwrap_or("?"),
            )?;
        }
        _ => writeln!(out, "fit: UNDERDETERMINED ({})", doc["reason"].as_str().unwrap_or(""))?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::default();
        assert!(c.validate().is_ok());
        c.n_grid = vec![4, 8, 8];
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        c.n_grid = vec![8, 4];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.trials = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_file_merges_and_rejects_unknown_keys() {
        let f: ConfigFile = toml::from_str("seed = 7\nn_grid = [3, 5]\nc_log = 1.5").unwrap();
        let c = ExperimentConfig::default().merge_file(f);
        assert_eq!((c.seed, c.n_grid.clone(), c.c_log), (7, vec![3, 5], 1.5));
        assert!(toml::from_str::<ConfigFile>("sed = 7").is_err());
    }

    #[test]
    fn csv_roundtrip_and_schema_errors() {
        let rows = vec![EstimateResult::from_counts(3, 52, 100, 9), EstimateResult::from_counts(4, 37, 100, 9)];
        let bytes = csv_bytes(Schema::Mc, &rows, "").unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap() == "n,trials,successes,p_hat,ci_low,ci_high,seed");
        let back: Vec<EstimateResult> = read_csv(Schema::Mc, &bytes).unwrap();
        assert_eq!(back, rows);
        assert!(read_csv::<EstimateResult>(Schema::Sheet, &bytes).is_err());
        let renamed = text.replacen("p_hat", "phat", 1);
        assert_eq!(read_csv::<EstimateResult>(Schema::Mc, renamed.as_bytes()).unwrap_err().exit_code(), 2);
        let no_tag = text.lines().skip(1).collect::<Vec<_>>().join("\n");
        assert!(read_csv::<EstimateResult>(Schema::Mc, no_tag.as_bytes()).is_err());
    }

    #[test]
    fn fit_document_flags_underdetermined() {
        let rows: Vec<_> = [4, 8, 16].iter().map(|&n| EstimateResult::from_counts(n, 1000 / n as u64, 10_000, 1)).collect();
        let doc = fit_document(&rows, &FitOptions::default()).unwrap();
        assert_eq!(doc["status"], "UNDERDETERMINED");
    }

    #[test]
    fn refusal_above_cap() {
        assert_eq!(refuse_large(&[8, 65], false).unwrap_err().exit_code(), 4);
        assert!(refuse_large(&[8, 65], true).is_ok());
        assert!(refuse_large(&[64], false).is_ok());
    }

    #[test]
    fn cli_parses_spec_flags() {
        let c = Cli::try_parse_from(["bruhat", "hyper", "--N", "100", "--B", "30", "--A", "20", "--k", "6"]).unwrap();
        assert!(matches!(c.command, Command::Hyper(HyperArgs { k: Some(6), .. })));
        let c = Cli::try_parse_from(["bruhat", "mc", "--n", "4,6,8", "--trials", "10", "--seed", "3"]).unwrap();
        assert!(matches!(c.command, Command::Mc(McArgs { n: Some(ref v), .. }) if v == &vec![4, 6, 8]));
        assert!(Cli::try_parse_from(["bruhat", "pipeline-scaling", "--n", "4,8"]).is_ok());
        assert!(Cli::try_parse_from(["bruhat", "gauss", "--grid", "4,8,16", "--mode", "zeta"]).is_ok());
    }
}
