//! `dse` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 evaluator failure,
//! 3 I/O failure.

pub mod artifacts;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use artifacts::*;
use dse_core::design_space::SpaceDefinition;
use dse_core::evaluators::DEFAULT_TIMEOUT;
use dse_core::oracle::{compare_benchmark, oracle_search, OracleError, DEFAULT_GUARD};
use dse_core::{
    Cached, ComparisonReport, DesignSpace, EvalError, Evaluator, EvaluatorSpec, ExploreError,
    ExplorationLog, Explorer, Profile, RunResult, WeightVector,
};

pub const GUARD_ENV: &str = "DSE_ORACLE_GUARD";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Evaluator(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Evaluator(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::Spec(_) | EvalError::Table(_) => CliError::Invalid(e.to_string()),
        other => CliError::Evaluator(other.to_string()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "dse", version, about = "Significance-guided design space exploration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a design space file.
    Validate { space: PathBuf },
    /// Explore a space and write a run directory.
    Run(RunArgs),
    /// Enumerate the full space of a finished run.
    Oracle {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Refuse spaces larger than this (default 1000000, or $DSE_ORACLE_GUARD).
        #[arg(long)]
        guard: Option<u64>,
    },
    /// Compare a run directory with an oracle directory.
    Compare {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        oracle: PathBuf,
        /// Defaults to the oracle directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a run for several thresholds sharing one evaluation cache.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub space: PathBuf,
    /// `power=0.9,time=0.1`
    #[arg(long, conflicts_with = "profile")]
    pub weights: Option<String>,
    /// `lowpower` or `highperf`
    #[arg(long)]
    pub profile: Option<String>,
    /// `synthetic[:<profile>]`, `sepmono`, `table:<csv>`, `exec:<command>`
    #[arg(long)]
    pub evaluator: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated benchmark list replacing the space file's.
    #[arg(long, value_delimiter = ',')]
    pub benchmarks: Option<Vec<String>>,
    /// Concurrent evaluations (default 1 for exec, all cores otherwise).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Per-request timeout for exec workers, seconds.
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs())]
    pub timeout: u64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub threshold: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub thresholds: Vec<u64>,
    #[command(flatten)]
    pub common: Common,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { space } => cmd_validate(&space),
        Command::Run(args) => cmd_run(&args),
        Command::Oracle { run, out, guard } => cmd_oracle(&run, &out, guard),
        Command::Compare { run, oracle, out } => {
            let out = out.unwrap_or_else(|| oracle.clone());
            cmd_compare(&run, &oracle, &out)
        }
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

pub fn cmd_validate(path: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let def = SpaceDefinition::from_json(&text).map_err(|e| invalid(e.to_string()))?;
    for w in def.warnings() {
        eprintln!("warning: {w}");
    }
    let violations = def.validate();
    if !violations.is_empty() {
        for v in &violations {
            println!("violation: {v}");
        }
        return Err(invalid(format!(
            "{}: {} violation(s)",
            path.display(),
            violations.len()
        )));
    }
    let space = DesignSpace::try_from(def).map_err(|e| invalid(e.to_string()))?;
    let card = space.cardinality(None).map_err(|e| invalid(e.to_string()))?;
    println!(
        "{}: valid, {} parameters, {} benchmarks, {card} configurations",
        path.display(),
        space.len(),
        space.benchmarks().len()
    );
    Ok(())
}

/// Validated inputs shared by `run` and `sweep`.
struct Prepared {
    space: DesignSpace,
    space_path: PathBuf,
    space_sha256: String,
    weights: WeightVector,
    spec: EvaluatorSpec,
    timeout: Duration,
    jobs: Option<usize>,
}

fn resolve_weights(c: &Common) -> Result<WeightVector, CliError> {
    match (&c.weights, &c.profile) {
        (Some(w), None) => WeightVector::parse(w).map_err(|e| invalid(e.to_string())),
        (None, Some(p)) => p
            .parse::<Profile>()
            .map(Profile::weights)
            .map_err(|e| invalid(e.to_string())),
        _ => Err(invalid("exactly one of --weights or --profile is required")),
    }
}

fn prepare(c: &Common) -> Result<Prepared, CliError> {
    let bytes = fs::read(&c.space).map_err(|e| io_err(&c.space, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| invalid(format!("{}: {e}", c.space.display())))?;
    let mut space = DesignSpace::from_json(&text).map_err(|e| invalid(e.to_string()))?;
    if let Some(b) = &c.benchmarks {
        space = space.with_benchmarks(b.clone()).map_err(|e| invalid(e.to_string()))?;
    }
    let weights = resolve_weights(c)?;
    let mut spec: EvaluatorSpec = c.evaluator.parse().map_err(eval_err)?;
    if let EvaluatorSpec::Table(p) = &spec {
        let abs = fs::canonicalize(p).map_err(|e| io_err(p, e))?;
        spec = EvaluatorSpec::Table(abs);
    }
    if c.jobs == Some(0) {
        return Err(invalid("--jobs must be >= 1"));
    }
    Ok(Prepared {
        space_path: fs::canonicalize(&c.space).map_err(|e| io_err(&c.space, e))?,
        space_sha256: sha256_hex(&bytes),
        space,
        weights,
        spec,
        timeout: Duration::from_secs(c.timeout),
        jobs: c.jobs,
    })
}

impl Prepared {
    fn manifest(&self, threshold: u64, out: &Path) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            space_path: self.space_path.clone(),
            space_sha256: self.space_sha256.clone(),
            weights: self.weights.clone(),
            threshold,
            evaluator: self.spec.to_string(),
            benchmarks: self.space.benchmarks().to_vec(),
            timeout_secs: self.timeout.as_secs(),
            out_dir: out.to_path_buf(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            replay_hash: String::new(),
        }
        .seal()
    }

    fn build(&self) -> Result<Box<dyn Evaluator>, CliError> {
        self.spec.build(&self.space, self.timeout).map_err(eval_err)
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        let jobs = self.jobs.unwrap_or(match self.spec {
            EvaluatorSpec::Exec(_) => 1,
            _ => 0,
        });
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn artifact<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), ArtifactError>,
{
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| io_err(path, e))?;
    write_file(path, buf)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Runs the explorer and writes a complete run directory.
fn execute_run(
    p: &Prepared,
    evaluator: &dyn Evaluator,
    threshold: u64,
    out: &Path,
) -> Result<RunResult, CliError> {
    let explorer = Explorer::new(&p.space, p.weights.clone(), threshold).map_err(|e| match e {
        ExploreError::InvalidThreshold => invalid("threshold must be >= 1"),
        other => invalid(other.to_string()),
    })?;
    create_dir(out)?;
    let run = p.pool()?.install(|| explorer.run(evaluator));

    let manifest = p.manifest(threshold, out);
    write_file(&out.join(MANIFEST), to_json_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?)?;
    let result = ResultFile::from_run(&p.space, &run);
    write_file(&out.join(RESULT), to_json_pretty(&result).map_err(|e| CliError::Io(e.to_string()))?)?;
    artifact(&out.join(EVALS), |b| write_evals(b, &p.space, &run.log()))?;
    artifact(&out.join(SIGNIFICANCE), |b| write_rows(b, &significance_rows(&p.space, &run)))?;
    artifact(&out.join(PARETO), |b| write_pareto(b, &p.space, &pareto_rows(&run)))?;

    for r in run.results() {
        if let Some(w) = &r.partition.warning {
            eprintln!("warning: {}: {w}", r.benchmark);
        }
        println!(
            "{}: F={:.6} {} ({} unique evaluations)",
            r.benchmark,
            r.objective,
            p.space.describe(&r.best),
            r.unique_evaluations
        );
    }
    Ok(run)
}

fn failures_to_error(run: &RunResult) -> Result<(), CliError> {
    let failed: Vec<String> = run
        .failures()
        .map(|(b, e)| format!("{b}: {e}"))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Evaluator(failed.join("; ")))
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    if args.threshold == 0 {
        return Err(invalid("threshold must be >= 1"));
    }
    let p = prepare(&args.common)?;
    let evaluator = p.build()?;
    let run = execute_run(&p, evaluator.as_ref(), args.threshold, &args.common.out)?;
    failures_to_error(&run)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    if args.thresholds.len() < 2 {
        return Err(invalid("sweep needs at least two thresholds; use `run` for one"));
    }
    if args.thresholds.contains(&0) {
        return Err(invalid("threshold must be >= 1"));
    }
    let p = prepare(&args.common)?;
    let shared = Cached::new(p.build()?);
    let cardinality = p.space.cardinality(None).map_err(|e| invalid(e.to_string()))?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &t in &args.thresholds {
        let out = args.common.out.join(format!("T{t}"));
        let run = execute_run(&p, &shared, t, &out)?;
        if let Err(e) = failures_to_error(&run) {
            failures.push(format!("T={t}: {e}"));
        }
        rows.extend(run.results().map(|r| SweepRow {
            threshold: t,
            benchmark: r.benchmark.clone(),
            objective: r.objective,
            unique_evaluations: r.unique_evaluations,
            cardinality,
            explored_percent: 100.0 * r.unique_evaluations as f64 / cardinality as f64,
        }));
    }
    artifact(&args.common.out.join(SWEEP), |b| write_rows(b, &rows))?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Evaluator(failures.join("; ")))
    }
}

fn read_json<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Loads the space a manifest refers to and checks its hash.
fn manifest_space(m: &RunManifest) -> Result<DesignSpace, CliError> {
    let bytes = fs::read(&m.space_path).map_err(|e| io_err(&m.space_path, e))?;
    if sha256_hex(&bytes) != m.space_sha256 {
        return Err(invalid(format!(
            "{} changed since the run (sha256 mismatch)",
            m.space_path.display()
        )));
    }
    let text = String::from_utf8(bytes).map_err(|e| invalid(e.to_string()))?;
    DesignSpace::from_json(&text)
        .and_then(|s| s.with_benchmarks(m.benchmarks.clone()))
        .map_err(|e| invalid(e.to_string()))
}

fn guard_from_env() -> Result<u64, CliError> {
    match std::env::var(GUARD_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| invalid(format!("{GUARD_ENV}=`{v}` is not a positive integer"))),
        Err(_) => Ok(DEFAULT_GUARD),
    }
}

pub fn cmd_oracle(run_dir: &Path, out: &Path, guard: Option<u64>) -> Result<(), CliError> {
    let guard = match guard {
        Some(g) => g,
        None => guard_from_env()?,
    };
    let manifest: RunManifest = read_json(&run_dir.join(MANIFEST))?;
    let result: ResultFile = read_json(&run_dir.join(RESULT))?;
    let space = manifest_space(&manifest)?;
    let spec: EvaluatorSpec = manifest.evaluator.parse().map_err(eval_err)?;
    let evaluator = spec
        .build(&space, Duration::from_secs(manifest.timeout_secs))
        .map_err(eval_err)?;

    let mut entries = Vec::new();
    for s in result.summaries() {
        let o = oracle_search(
            &space,
            &s.benchmark,
            evaluator.as_ref(),
            &manifest.weights,
            &s.normalization,
            guard,
        )
        .map_err(|e| match e {
            OracleError::Eval(e) => eval_err(e),
            other => invalid(other.to_string()),
        })?;
        println!(
            "{}: oracle F={:.6} {} ({} evaluations)",
            o.benchmark,
            o.objective,
            space.describe(&o.best),
            o.evaluations
        );
        entries.push(OracleEntry::from_result(&space, &o));
    }
    let file = OracleFile {
        replay_hash: manifest.replay_hash.clone(),
        space_sha256: manifest.space_sha256.clone(),
        weights: manifest.weights.clone(),
        guard,
        benchmarks: entries,
    };
    create_dir(out)?;
    write_file(&out.join(ORACLE), to_json_pretty(&file).map_err(|e| CliError::Io(e.to_string()))?)?;
    write_file(&out.join(MANIFEST), to_json_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?)?;
    Ok(())
}

pub fn cmd_compare(run_dir: &Path, oracle_dir: &Path, out: &Path) -> Result<(), CliError> {
    let manifest: RunManifest = read_json(&run_dir.join(MANIFEST))?;
    let oracle: OracleFile = read_json(&oracle_dir.join(ORACLE))?;
    let oracle_manifest: RunManifest = read_json(&oracle_dir.join(MANIFEST))?;
    let mut mismatches = Vec::new();
    if oracle.space_sha256 != manifest.space_sha256 || oracle_manifest.space_sha256 != manifest.space_sha256 {
        mismatches.push("space hash");
    }
    if oracle.weights != manifest.weights {
        mismatches.push("weights");
    }
    if oracle.replay_hash != manifest.replay_hash || oracle_manifest.replay_hash != manifest.replay_hash {
        mismatches.push("replay hash");
    }
    if !mismatches.is_empty() {
        return Err(invalid(format!(
            "manifest mismatch between {} and {}: {}",
            run_dir.display(),
            oracle_dir.display(),
            mismatches.join(", ")
        )));
    }
    let space = manifest_space(&manifest)?;
    let result: ResultFile = read_json(&run_dir.join(RESULT))?;
    let evals_path = run_dir.join(EVALS);
    let evals = fs::File::open(&evals_path).map_err(|e| io_err(&evals_path, e))?;
    let log = read_evals(evals, &space).map_err(|e| invalid(format!("{}: {e}", evals_path.display())))?;

    let mut rows = Vec::new();
    for s in result.summaries() {
        let mut bench_log = ExplorationLog::new();
        for r in log.for_benchmark(&s.benchmark) {
            bench_log.push(r.clone());
        }
        let run = s.to_result(&space, bench_log).map_err(|e| invalid(e.to_string()))?;
        let entry = oracle
            .benchmarks
            .iter()
            .find(|o| o.benchmark == s.benchmark)
            .ok_or_else(|| invalid(format!("oracle has no result for `{}`", s.benchmark)))?;
        let o = entry.to_result(&space).map_err(|e| invalid(e.to_string()))?;
        rows.push(compare_benchmark(&space, &run, &o, Some(&run.log)).map_err(|e| invalid(e.to_string()))?);
    }
    let report = ComparisonReport::new(manifest.weights.clone(), manifest.threshold, rows);
    create_dir(out)?;
    write_file(&out.join(COMPARE_JSON), to_json_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?)?;
    let text = report.to_text();
    write_file(&out.join(COMPARE_TXT), &text)?;
    print!("{text}");
    Ok(())
}
