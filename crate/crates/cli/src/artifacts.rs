//! Run-directory files: manifest, results, logs and reports.
//!
//! Every writer has a matching reader and `read(write(x)) == x`.

use std::io::{Read, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use dse_core::explorer::BenchmarkOutcome;
use dse_core::objective::Normalization;
use dse_core::pareto::{pareto_front, select_tradeoff};
use dse_core::{
    BenchmarkResult, Configuration, DesignSpace, ExplorationLog, LogRecord, MetricVector,
    OracleResult, Partition, Phase, RunResult, Significance, WeightVector,
};

pub const MANIFEST: &str = "manifest.json";
pub const RESULT: &str = "result.json";
pub const EVALS: &str = "evals.csv";
pub const SIGNIFICANCE: &str = "significance.csv";
pub const PARETO: &str = "pareto.csv";
pub const ORACLE: &str = "oracle.json";
pub const COMPARE_JSON: &str = "compare.json";
pub const COMPARE_TXT: &str = "compare.txt";
pub const SWEEP: &str = "sweep.csv";

pub type ConfigMap = Map<String, Value>;

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Format(String),
}

fn bad(msg: impl Into<String>) -> ArtifactError {
    ArtifactError::Format(msg.into())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub space_path: PathBuf,
    pub space_sha256: String,
    pub weights: WeightVector,
    pub threshold: u64,
    pub evaluator: String,
    pub benchmarks: Vec<String>,
    pub timeout_secs: u64,
    pub out_dir: PathBuf,
    pub created_unix: u64,
    /// Hash of the inputs that determine the results; excludes paths and time.
    pub replay_hash: String,
}

impl RunManifest {
    pub fn replay_hash_of(&self) -> String {
        let key = serde_json::json!({
            "tool_version": self.tool_version,
            "space_sha256": self.space_sha256,
            "weights": self.weights,
            "threshold": self.threshold,
            "evaluator": self.evaluator,
            "benchmarks": self.benchmarks,
        });
        sha256_hex(key.to_string().as_bytes())
    }

    pub fn seal(mut self) -> Self {
        self.replay_hash = self.replay_hash_of();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceEntry {
    pub parameter: String,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionEntry {
    pub exhaustive: Vec<String>,
    pub greedy: Vec<String>,
    pub oneshot: Vec<String>,
    pub exhaustive_size: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub benchmark: String,
    pub best: ConfigMap,
    pub metrics: MetricVector,
    pub objective: f64,
    pub unique_evaluations: u64,
    pub total_requests: u64,
    pub evaluation_bound: u64,
    pub oneshot_best: ConfigMap,
    pub exhaustive_objective: f64,
    pub significance: Vec<SignificanceEntry>,
    pub partition: PartitionEntry,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum BenchmarkEntry {
    Ok(Box<BenchmarkSummary>),
    Failed {
        benchmark: String,
        error: String,
        evaluations: u64,
    },
}

impl BenchmarkEntry {
    pub fn benchmark(&self) -> &str {
        match self {
            BenchmarkEntry::Ok(s) => &s.benchmark,
            BenchmarkEntry::Failed { benchmark, .. } => benchmark,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub threshold: u64,
    pub weights: WeightVector,
    pub benchmarks: Vec<BenchmarkEntry>,
}

fn names(space: &DesignSpace, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&p| space.parameter(p).name.clone()).collect()
}

fn indices(space: &DesignSpace, names: &[String]) -> Result<Vec<usize>, ArtifactError> {
    names
        .iter()
        .map(|n| space.index_of(n).map_err(|e| bad(e.to_string())))
        .collect()
}

impl BenchmarkSummary {
    pub fn from_result(space: &DesignSpace, r: &BenchmarkResult) -> Self {
        Self {
            benchmark: r.benchmark.clone(),
            best: space.config_json(&r.best),
            metrics: r.metrics.clone(),
            objective: r.objective,
            unique_evaluations: r.unique_evaluations,
            total_requests: r.total_requests,
            evaluation_bound: r.evaluation_bound(space),
            oneshot_best: space.config_json(&r.oneshot_best),
            exhaustive_objective: r.exhaustive_objective,
            significance: r
                .significance
                .entries()
                .iter()
                .map(|&(p, d)| SignificanceEntry {
                    parameter: space.parameter(p).name.clone(),
                    d,
                })
                .collect(),
            partition: PartitionEntry {
                exhaustive: names(space, &r.partition.exhaustive),
                greedy: names(space, &r.partition.greedy),
                oneshot: names(space, &r.partition.oneshot),
                exhaustive_size: r.partition.exhaustive_size,
                warning: r.partition.warning.clone(),
            },
            normalization: r.normalization.clone(),
        }
    }

    /// Rebuilds the in-memory result; `log` is the benchmark's slice of
    /// `evals.csv`.
    pub fn to_result(
        &self,
        space: &DesignSpace,
        log: ExplorationLog,
    ) -> Result<BenchmarkResult, ArtifactError> {
        let config = |m: &ConfigMap| space.config_from_json(m).map_err(|e| bad(e.to_string()));
        let significance = self
            .significance
            .iter()
            .map(|s| Ok((space.index_of(&s.parameter).map_err(|e| bad(e.to_string()))?, s.d)))
            .collect::<Result<Vec<_>, ArtifactError>>()?;
        Ok(BenchmarkResult {
            benchmark: self.benchmark.clone(),
            best: config(&self.best)?,
            metrics: self.metrics.clone(),
            objective: self.objective,
            significance: Significance::new(significance),
            partition: Partition {
                exhaustive: indices(space, &self.partition.exhaustive)?,
                greedy: indices(space, &self.partition.greedy)?,
                oneshot: indices(space, &self.partition.oneshot)?,
                exhaustive_size: self.partition.exhaustive_size,
                warning: self.partition.warning.clone(),
            },
            normalization: self.normalization.clone(),
            oneshot_best: config(&self.oneshot_best)?,
            exhaustive_objective: self.exhaustive_objective,
            unique_evaluations: self.unique_evaluations,
            total_requests: self.total_requests,
            log,
        })
    }
}

impl ResultFile {
    pub fn from_run(space: &DesignSpace, run: &RunResult) -> Self {
        let benchmarks = run
            .outcomes
            .iter()
            .map(|o| match o {
                BenchmarkOutcome::Done(r) => {
                    BenchmarkEntry::Ok(Box::new(BenchmarkSummary::from_result(space, r)))
                }
                BenchmarkOutcome::Failed {
                    benchmark,
                    error,
                    log,
                } => BenchmarkEntry::Failed {
                    benchmark: benchmark.clone(),
                    error: error.to_string(),
                    evaluations: log.distinct_configs(benchmark) as u64,
                },
            })
            .collect();
        Self {
            threshold: run.threshold,
            weights: run.weights.clone(),
            benchmarks,
        }
    }

    pub fn summaries(&self) -> impl Iterator<Item = &BenchmarkSummary> {
        self.benchmarks.iter().filter_map(|b| match b {
            BenchmarkEntry::Ok(s) => Some(s.as_ref()),
            BenchmarkEntry::Failed { .. } => None,
        })
    }
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String, ArtifactError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn metric_names(log: &ExplorationLog) -> Vec<String> {
    log.records()
        .first()
        .map(|r| r.raw.names().map(str::to_owned).collect())
        .unwrap_or_default()
}

fn num(v: f64) -> String {
    // shortest representation that parses back to the same value
    format!("{v}")
}

fn parse_num(s: &str, what: &str) -> Result<f64, ArtifactError> {
    s.parse().map_err(|_| bad(format!("bad {what} `{s}`")))
}

fn setting_index(space: &DesignSpace, p: usize, text: &str) -> Result<usize, ArtifactError> {
    space.parameter(p).position_by_text(text).ok_or_else(|| {
        bad(format!(
            "`{text}` is not a setting of `{}`",
            space.parameter(p).name
        ))
    })
}

/// `benchmark,phase,seq,<params>,<metrics>,norm_<metrics>,objective`.
pub fn write_evals(
    out: impl Write,
    space: &DesignSpace,
    log: &ExplorationLog,
) -> Result<(), ArtifactError> {
    let metrics = metric_names(log);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["benchmark".to_owned(), "phase".into(), "seq".into()];
    header.extend(space.parameters().iter().map(|p| p.name.clone()));
    header.extend(metrics.iter().cloned());
    header.extend(metrics.iter().map(|m| format!("norm_{m}")));
    header.push("objective".into());
    w.write_record(&header)?;
    for r in log.records() {
        let mut row = vec![r.benchmark.clone(), r.phase.to_string(), r.seq.to_string()];
        row.extend((0..space.len()).map(|p| space.value(&r.config, p).to_string()));
        for m in &metrics {
            row.push(num(r.raw.get(m).ok_or_else(|| bad(format!("record lacks `{m}`")))?));
        }
        for m in &metrics {
            row.push(num(r.normalized.get(m).unwrap_or(f64::NAN)));
        }
        row.push(num(r.objective));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_evals(input: impl Read, space: &DesignSpace) -> Result<ExplorationLog, ArtifactError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    let n = space.len();
    let fixed = 3 + n + 1;
    if header.len() < fixed || !(header.len() - fixed).is_multiple_of(2) {
        return Err(bad("evals.csv header has an unexpected number of columns"));
    }
    for (i, p) in space.parameters().iter().enumerate() {
        if header.get(3 + i) != Some(p.name.as_str()) {
            return Err(bad(format!("evals.csv column {} should be `{}`", 4 + i, p.name)));
        }
    }
    let k = (header.len() - fixed) / 2;
    let metrics: Vec<String> = (0..k).map(|i| header[3 + n + i].to_owned()).collect();
    let mut log = ExplorationLog::new();
    for row in rdr.records() {
        let row = row?;
        let phase: Phase = row[1].parse().map_err(bad)?;
        let seq: u64 = row[2].parse().map_err(|_| bad(format!("bad seq `{}`", &row[2])))?;
        let config = (0..n)
            .map(|p| setting_index(space, p, &row[3 + p]))
            .collect::<Result<Vec<_>, _>>()?;
        let mut raw = MetricVector::default();
        let mut normalized = MetricVector::default();
        for (i, m) in metrics.iter().enumerate() {
            raw.0.insert(m.clone(), parse_num(&row[3 + n + i], m)?);
            normalized.0.insert(m.clone(), parse_num(&row[3 + n + k + i], m)?);
        }
        if seq != log.len() as u64 {
            return Err(bad(format!("seq {seq} out of order")));
        }
        log.push(LogRecord {
            benchmark: row[0].to_owned(),
            phase,
            seq,
            config: Configuration(config),
            raw,
            normalized,
            objective: parse_num(&row[row.len() - 1], "objective")?,
        });
    }
    Ok(log)
}

/// One row per tunable parameter per benchmark, ranked by `|d|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub benchmark: String,
    pub rank: usize,
    pub parameter: String,
    pub d: f64,
    pub abs_d: f64,
    pub set: String,
    pub initial_best: String,
}

pub fn significance_rows(space: &DesignSpace, run: &RunResult) -> Vec<SignificanceRow> {
    let mut rows = Vec::new();
    for r in run.results() {
        for (rank, p) in r.significance.ranked().into_iter().enumerate() {
            let d = r.significance.get(p).unwrap_or(0.0);
            let set = if r.partition.exhaustive.contains(&p) {
                "exhaustive"
            } else if r.partition.greedy.contains(&p) {
                "greedy"
            } else {
                "oneshot"
            };
            rows.push(SignificanceRow {
                benchmark: r.benchmark.clone(),
                rank: rank + 1,
                parameter: space.parameter(p).name.clone(),
                d,
                abs_d: d.abs(),
                set: set.into(),
                initial_best: space.value(&r.oneshot_best, p).to_string(),
            });
        }
    }
    rows
}

pub fn write_rows<T: Serialize>(out: impl Write, rows: &[T]) -> Result<(), ArtifactError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(input: impl Read) -> Result<Vec<T>, ArtifactError> {
    let mut rdr = csv::Reader::from_reader(input);
    let rows = rdr.deserialize().collect::<Result<Vec<T>, _>>()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoRow {
    pub benchmark: String,
    pub metrics: MetricVector,
    pub objective: f64,
    pub config: Configuration,
    pub chosen: bool,
}

/// Front of every successful benchmark, with the trade-off point marked.
pub fn pareto_rows(run: &RunResult) -> Vec<ParetoRow> {
    let mut rows = Vec::new();
    for r in run.results() {
        let front = pareto_front(r.log.records(), &r.benchmark);
        let chosen = select_tradeoff(&front, &r.normalization, &run.weights).ok();
        for (i, m) in front.members.iter().enumerate() {
            rows.push(ParetoRow {
                benchmark: r.benchmark.clone(),
                metrics: m.raw.clone(),
                objective: m.objective,
                config: m.config.clone(),
                chosen: chosen == Some(i),
            });
        }
    }
    rows
}

/// `benchmark,<metrics>,objective,<params>,chosen`.
pub fn write_pareto(
    out: impl Write,
    space: &DesignSpace,
    rows: &[ParetoRow],
) -> Result<(), ArtifactError> {
    let metrics: Vec<String> = rows
        .first()
        .map(|r| r.metrics.names().map(str::to_owned).collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["benchmark".to_owned()];
    header.extend(metrics.iter().cloned());
    header.push("objective".into());
    header.extend(space.parameters().iter().map(|p| p.name.clone()));
    header.push("chosen".into());
    w.write_record(&header)?;
    for r in rows {
        let mut row = vec![r.benchmark.clone()];
        for m in &metrics {
            row.push(num(r.metrics.get(m).unwrap_or(f64::NAN)));
        }
        row.push(num(r.objective));
        row.extend((0..space.len()).map(|p| space.value(&r.config, p).to_string()));
        row.push(u8::from(r.chosen).to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_pareto(input: impl Read, space: &DesignSpace) -> Result<Vec<ParetoRow>, ArtifactError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    let n = space.len();
    if header.len() < n + 3 {
        return Err(bad("pareto.csv header too short"));
    }
    let k = header.len() - n - 3;
    let metrics: Vec<String> = (0..k).map(|i| header[1 + i].to_owned()).collect();
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let mut mv = MetricVector::default();
        for (i, m) in metrics.iter().enumerate() {
            mv.0.insert(m.clone(), parse_num(&row[1 + i], m)?);
        }
        let config = (0..n)
            .map(|p| setting_index(space, p, &row[2 + k + p]))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(ParetoRow {
            benchmark: row[0].to_owned(),
            metrics: mv,
            objective: parse_num(&row[1 + k], "objective")?,
            config: Configuration(config),
            chosen: match &row[row.len() - 1] {
                "1" => true,
                "0" => false,
                other => return Err(bad(format!("bad chosen flag `{other}`"))),
            },
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub benchmark: String,
    pub best: ConfigMap,
    pub metrics: MetricVector,
    pub objective: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleFile {
    pub replay_hash: String,
    pub space_sha256: String,
    pub weights: WeightVector,
    pub guard: u64,
    pub benchmarks: Vec<OracleEntry>,
}

impl OracleEntry {
    pub fn from_result(space: &DesignSpace, o: &OracleResult) -> Self {
        Self {
            benchmark: o.benchmark.clone(),
            best: space.config_json(&o.best),
            metrics: o.metrics.clone(),
            objective: o.objective,
            evaluations: o.evaluations,
        }
    }

    pub fn to_result(&self, space: &DesignSpace) -> Result<OracleResult, ArtifactError> {
        Ok(OracleResult {
            benchmark: self.benchmark.clone(),
            best: space.config_from_json(&self.best).map_err(|e| bad(e.to_string()))?,
            metrics: self.metrics.clone(),
            objective: self.objective,
            evaluations: self.evaluations,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: u64,
    pub benchmark: String,
    pub objective: f64,
    pub unique_evaluations: u64,
    pub cardinality: u64,
    pub explored_percent: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use dse_core::fixtures::{tiny_space, TinyEvaluator};
    use dse_core::{Explorer, Profile};

    fn tiny_run() -> (DesignSpace, RunResult) {
        let space = tiny_space();
        let run = Explorer::new(&space, Profile::HighPerf.weights(), 3)
            .unwrap()
            .run(&TinyEvaluator::default());
        (space, run)
    }

    #[test]
    fn evals_round_trip() {
        let (space, run) = tiny_run();
        let log = run.log();
        let mut buf = Vec::new();
        write_evals(&mut buf, &space, &log).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("benchmark,phase,seq,A,B,power,time,norm_power,norm_time,objective\n"));
        assert_eq!(read_evals(buf.as_slice(), &space).unwrap(), log);
    }

    #[test]
    fn result_round_trip_and_rebuild() {
        let (space, run) = tiny_run();
        let file = ResultFile::from_run(&space, &run);
        let text = to_json_pretty(&file).unwrap();
        let back: ResultFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
        let s = back.summaries().next().unwrap();
        assert_eq!(s.best["A"], Value::from(4));
        assert_eq!(s.unique_evaluations, 5);
        let r = run.get("t").unwrap();
        let rebuilt = s.to_result(&space, r.log.clone()).unwrap();
        assert_eq!(rebuilt.best, r.best);
        assert_eq!(rebuilt.partition, r.partition);
        assert_eq!(rebuilt.significance, r.significance);
    }

    #[test]
    fn failed_entry_round_trip() {
        let e = BenchmarkEntry::Failed {
            benchmark: "x".into(),
            error: "boom".into(),
            evaluations: 2,
        };
        let text = serde_json::to_string(&e).unwrap();
        assert!(text.contains(r#""status":"failed""#));
        assert_eq!(serde_json::from_str::<BenchmarkEntry>(&text).unwrap(), e);
    }

    #[test]
    fn significance_and_pareto_round_trip() {
        let (space, run) = tiny_run();
        let rows = significance_rows(&space, &run);
        assert_eq!(rows[0].parameter, "A");
        assert_eq!(rows[0].set, "exhaustive");
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        assert_eq!(read_rows::<SignificanceRow>(buf.as_slice()).unwrap(), rows);

        let front = pareto_rows(&run);
        assert_eq!(front.iter().filter(|r| r.chosen).count(), 1);
        let mut buf = Vec::new();
        write_pareto(&mut buf, &space, &front).unwrap();
        assert_eq!(read_pareto(buf.as_slice(), &space).unwrap(), front);
    }

    #[test]
    fn replay_hash_ignores_time_and_paths() {
        let m = RunManifest {
            tool_version: "0.1.0".into(),
            space_path: "/a/space.json".into(),
            space_sha256: "00".into(),
            weights: Profile::LowPower.weights(),
            threshold: 150,
            evaluator: "sepmono".into(),
            benchmarks: vec!["b".into()],
            timeout_secs: 300,
            out_dir: "/out/1".into(),
            created_unix: 1,
            replay_hash: String::new(),
        }
        .seal();
        let mut other = m.clone();
        other.out_dir = "/out/2".into();
        other.space_path = "/b/space.json".into();
        other.created_unix = 2;
        assert_eq!(other.replay_hash_of(), m.replay_hash);
        other.threshold = 400;
        assert_ne!(other.replay_hash_of(), m.replay_hash);
        let back: RunManifest = serde_json::from_str(&to_json_pretty(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
