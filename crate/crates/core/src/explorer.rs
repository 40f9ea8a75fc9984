//! The four-phase search.
//!
//! Per benchmark:
//!
//! 1. **One-shot.** For every tunable parameter evaluate the configuration
//!    with that parameter at its last setting and everything else at the
//!    first setting, plus the all-first configuration. The per-metric maxima
//!    of these records normalize every later objective. The signed
//!    significance of a parameter is `F(last) - F(first)`; its initial best
//!    setting is the first setting when that difference is positive and the
//!    last setting otherwise.
//! 2. **Partition.** Rank parameters by `|D|` (stable on declaration order).
//!    Admit them into the exhaustive set while the product of their setting
//!    counts stays within the threshold; the next `ceil(rest / 2)` form the
//!    greedy set; the remainder keep their one-shot value.
//! 3. **Exhaustive.** Enumerate the exhaustive set with everything else at
//!    its best setting and keep the strictly smallest objective.
//! 4. **Greedy.** Walk each greedy parameter from its one-shot endpoint
//!    towards the other end, accepting strict improvements and stopping at
//!    the first candidate that does not improve.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design_space::{Configuration, DesignSpace, PartialConfiguration, SpaceError};
use crate::evaluators::{Cached, EvalError, Evaluator};
use crate::objective::{
    validate_weights, MetricVector, Normalization, ObjectiveError, WeightVector, WeightViolation,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExploreError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("{0}")]
    Space(String),
    #[error("threshold must be >= 1")]
    InvalidThreshold,
    #[error("invalid weights: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidWeights(Vec<WeightViolation>),
    #[error("benchmark `{0}` is not part of the space")]
    UnknownBenchmark(String),
    #[error("evaluator returned metrics {got:?}, expected {expected:?}")]
    MetricKeys {
        expected: Vec<String>,
        got: Vec<String>,
    },
}

impl From<SpaceError> for ExploreError {
    fn from(e: SpaceError) -> Self {
        ExploreError::Space(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    OneShot,
    Exhaustive,
    Greedy,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::OneShot => "oneshot",
            Phase::Exhaustive => "exhaustive",
            Phase::Greedy => "greedy",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "oneshot" => Ok(Phase::OneShot),
            "exhaustive" => Ok(Phase::Exhaustive),
            "greedy" => Ok(Phase::Greedy),
            other => Err(format!("unknown phase `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub benchmark: String,
    pub phase: Phase,
    pub seq: u64,
    pub config: Configuration,
    pub raw: MetricVector,
    pub normalized: MetricVector,
    pub objective: f64,
}

/// Append-only evaluation log. Sequence numbers are assigned on push.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExplorationLog {
    records: Vec<LogRecord>,
}

impl ExplorationLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, mut record: LogRecord) {
        record.seq = self.records.len() as u64;
        self.records.push(record);
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn for_benchmark<'a>(&'a self, benchmark: &'a str) -> impl Iterator<Item = &'a LogRecord> {
        self.records.iter().filter(move |r| r.benchmark == benchmark)
    }

    pub fn distinct_configs(&self, benchmark: &str) -> usize {
        self.for_benchmark(benchmark)
            .map(|r| &r.config)
            .collect::<HashSet<_>>()
            .len()
    }
}

/// Signed significance `D` per tunable parameter, declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Significance {
    entries: Vec<(usize, f64)>,
}

impl Significance {
    pub fn new(entries: Vec<(usize, f64)>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, param: usize) -> Option<f64> {
        self.entries.iter().find(|(p, _)| *p == param).map(|(_, d)| *d)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parameters by descending `|D|`; ties keep declaration order.
    pub fn ranked(&self) -> Vec<usize> {
        let mut sorted = self.entries.clone();
        sorted.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
        sorted.into_iter().map(|(p, _)| p).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub exhaustive: Vec<usize>,
    pub greedy: Vec<usize>,
    pub oneshot: Vec<usize>,
    /// Product of setting counts over `exhaustive` (1 when empty).
    pub exhaustive_size: u64,
    pub warning: Option<String>,
}

/// Splits ranked parameters under threshold `threshold`.
pub fn partition(
    significance: &Significance,
    space: &DesignSpace,
    threshold: u64,
) -> Result<Partition, ExploreError> {
    if threshold == 0 {
        return Err(ExploreError::InvalidThreshold);
    }
    let ranked = significance.ranked();
    let mut size = 1u64;
    let mut split = 0;
    for &p in &ranked {
        let next = size.saturating_mul(space.parameter(p).len() as u64);
        if next > threshold {
            break;
        }
        size = next;
        split += 1;
    }
    let warning = (split == 0 && !ranked.is_empty()).then(|| {
        format!(
            "most significant parameter `{}` has {} settings, above threshold {threshold}; exhaustive set is empty",
            space.parameter(ranked[0]).name,
            space.parameter(ranked[0]).len()
        )
    });
    let greedy_count = (ranked.len() - split).div_ceil(2);
    Ok(Partition {
        exhaustive: ranked[..split].to_vec(),
        greedy: ranked[split..split + greedy_count].to_vec(),
        oneshot: ranked[split + greedy_count..].to_vec(),
        exhaustive_size: size,
        warning,
    })
}

/// Phase-1 output for one benchmark.
#[derive(Debug, Clone)]
pub struct OneShot {
    pub significance: Significance,
    pub best: Configuration,
    pub normalization: Normalization,
}

/// Search state for one benchmark.
pub struct BenchmarkSearch<'a> {
    pub space: &'a DesignSpace,
    pub benchmark: &'a str,
    pub evaluator: &'a dyn Evaluator,
    pub weights: &'a WeightVector,
}

impl BenchmarkSearch<'_> {
    fn eval_raw(&self, config: &Configuration) -> Result<MetricVector, ExploreError> {
        let v = self.evaluator.evaluate(self.space, config, self.benchmark)?;
        v.check()?;
        Ok(v)
    }

    fn eval_many(&self, configs: &[Configuration]) -> Result<Vec<MetricVector>, ExploreError> {
        if self.evaluator.is_reentrant() {
            configs.par_iter().map(|c| self.eval_raw(c)).collect()
        } else {
            configs.iter().map(|c| self.eval_raw(c)).collect()
        }
    }

    fn record(
        &self,
        log: &mut ExplorationLog,
        phase: Phase,
        config: Configuration,
        raw: MetricVector,
        norm: &Normalization,
    ) -> Result<f64, ExploreError> {
        if !raw.same_keys(&MetricVector(norm.maxima.keys().map(|k| (k.clone(), 0.0)).collect())) {
            return Err(ExploreError::MetricKeys {
                expected: norm.maxima.keys().cloned().collect(),
                got: raw.names().map(str::to_owned).collect(),
            });
        }
        let objective = norm.objective(&raw, self.weights)?;
        let normalized = norm.normalize(&raw)?;
        log.push(LogRecord {
            benchmark: self.benchmark.to_owned(),
            phase,
            seq: 0,
            config,
            raw,
            normalized,
            objective,
        });
        Ok(objective)
    }

    /// Significance, initial best settings and the normalization context.
    pub fn one_shot(&self, log: &mut ExplorationLog) -> Result<OneShot, ExploreError> {
        let tunable = self.space.tunable();
        let first = self.space.first_config();
        let mut configs = vec![first.clone()];
        for &p in &tunable {
            configs.push(first.with(p, self.space.parameter(p).len() - 1));
        }
        let raws = self.eval_many(&configs)?;

        let keys: Vec<&str> = raws[0].names().collect();
        let violations = validate_weights(self.weights, keys.iter().copied());
        if !violations.is_empty() {
            return Err(ExploreError::InvalidWeights(violations));
        }
        let normalization =
            Normalization::from_records(&raws).expect("at least the all-first record");

        let mut objectives = Vec::with_capacity(configs.len());
        for (c, raw) in configs.iter().zip(raws) {
            objectives.push(self.record(log, Phase::OneShot, c.clone(), raw, &normalization)?);
        }

        let f_first = objectives[0];
        let mut best = first;
        let mut entries = Vec::with_capacity(tunable.len());
        for (k, &p) in tunable.iter().enumerate() {
            let d = objectives[k + 1] - f_first;
            entries.push((p, d));
            if d <= 0.0 {
                best = best.with(p, self.space.parameter(p).len() - 1);
            }
        }
        Ok(OneShot {
            significance: Significance::new(entries),
            best,
            normalization,
        })
    }

    /// Full enumeration of the exhaustive set; returns the winner and its F.
    pub fn exhaustive(
        &self,
        partition: &Partition,
        best: &Configuration,
        norm: &Normalization,
        log: &mut ExplorationLog,
    ) -> Result<(Configuration, f64), ExploreError> {
        let mut fixed = PartialConfiguration::from_config(best);
        for &p in &partition.exhaustive {
            fixed.clear(p);
        }
        let configs: Vec<Configuration> = self
            .space
            .enumerate(&partition.exhaustive, &fixed)?
            .collect();
        let raws = self.eval_many(&configs)?;
        let mut winner = best.clone();
        let mut f_best = f64::INFINITY;
        for (c, raw) in configs.into_iter().zip(raws) {
            let f = self.record(log, Phase::Exhaustive, c.clone(), raw, norm)?;
            if f < f_best {
                f_best = f;
                winner = c;
            }
        }
        Ok((winner, f_best))
    }

    /// Directional walks over the greedy set, in ranked order.
    pub fn greedy(
        &self,
        partition: &Partition,
        significance: &Significance,
        start: Configuration,
        start_objective: f64,
        norm: &Normalization,
        log: &mut ExplorationLog,
    ) -> Result<(Configuration, f64), ExploreError> {
        let mut best = start;
        let mut f_best = start_objective;
        for &p in &partition.greedy {
            let len = self.space.parameter(p).len();
            let d = significance.get(p).unwrap_or(0.0);
            let walk: Vec<usize> = if d < 0.0 {
                (0..len).rev().collect()
            } else {
                (0..len).collect()
            };
            for setting in walk {
                let candidate = best.with(p, setting);
                let raw = self.eval_raw(&candidate)?;
                let f = self.record(log, Phase::Greedy, candidate.clone(), raw, norm)?;
                if candidate == best {
                    continue;
                }
                if f < f_best {
                    f_best = f;
                    best = candidate;
                } else {
                    break;
                }
            }
        }
        Ok((best, f_best))
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub benchmark: String,
    pub best: Configuration,
    pub metrics: MetricVector,
    pub objective: f64,
    pub significance: Significance,
    pub partition: Partition,
    pub normalization: Normalization,
    pub oneshot_best: Configuration,
    pub exhaustive_objective: f64,
    /// Distinct configurations this run requested for the benchmark.
    pub unique_evaluations: u64,
    pub total_requests: u64,
    pub log: ExplorationLog,
}

impl BenchmarkResult {
    /// `2n' + 1 + num_E + sum of L over the greedy set`.
    pub fn evaluation_bound(&self, space: &DesignSpace) -> u64 {
        let n = self.significance.entries().len() as u64;
        let greedy: u64 = self
            .partition
            .greedy
            .iter()
            .map(|&p| space.parameter(p).len() as u64)
            .sum();
        2 * n + 1 + self.partition.exhaustive_size + greedy
    }
}

#[derive(Debug, Clone)]
pub enum BenchmarkOutcome {
    Done(Box<BenchmarkResult>),
    Failed {
        benchmark: String,
        error: ExploreError,
        log: ExplorationLog,
    },
}

impl BenchmarkOutcome {
    pub fn benchmark(&self) -> &str {
        match self {
            BenchmarkOutcome::Done(r) => &r.benchmark,
            BenchmarkOutcome::Failed { benchmark, .. } => benchmark,
        }
    }

    pub fn result(&self) -> Option<&BenchmarkResult> {
        match self {
            BenchmarkOutcome::Done(r) => Some(r),
            BenchmarkOutcome::Failed { .. } => None,
        }
    }

    fn log(&self) -> &ExplorationLog {
        match self {
            BenchmarkOutcome::Done(r) => &r.log,
            BenchmarkOutcome::Failed { log, .. } => log,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub threshold: u64,
    pub weights: WeightVector,
    pub outcomes: Vec<BenchmarkOutcome>,
}

impl RunResult {
    pub fn get(&self, benchmark: &str) -> Option<&BenchmarkResult> {
        self.outcomes
            .iter()
            .find(|o| o.benchmark() == benchmark)
            .and_then(BenchmarkOutcome::result)
    }

    pub fn results(&self) -> impl Iterator<Item = &BenchmarkResult> {
        self.outcomes.iter().filter_map(BenchmarkOutcome::result)
    }

    pub fn failures(&self) -> impl Iterator<Item = (&str, &ExploreError)> {
        self.outcomes.iter().filter_map(|o| match o {
            BenchmarkOutcome::Failed { benchmark, error, .. } => Some((benchmark.as_str(), error)),
            BenchmarkOutcome::Done(_) => None,
        })
    }

    /// Every benchmark's log, benchmark order, renumbered globally.
    pub fn log(&self) -> ExplorationLog {
        let mut out = ExplorationLog::new();
        for o in &self.outcomes {
            for r in o.log().records() {
                out.push(r.clone());
            }
        }
        out
    }
}

/// Runs the four phases for every benchmark of a space.
pub struct Explorer<'a> {
    space: &'a DesignSpace,
    weights: WeightVector,
    threshold: u64,
}

impl<'a> Explorer<'a> {
    pub fn new(
        space: &'a DesignSpace,
        weights: WeightVector,
        threshold: u64,
    ) -> Result<Self, ExploreError> {
        if threshold == 0 {
            return Err(ExploreError::InvalidThreshold);
        }
        let names: Vec<String> = weights.0.keys().cloned().collect();
        let violations = validate_weights(&weights, names.iter().map(String::as_str));
        if !violations.is_empty() {
            return Err(ExploreError::InvalidWeights(violations));
        }
        Ok(Self {
            space,
            weights,
            threshold,
        })
    }

    pub fn space(&self) -> &DesignSpace {
        self.space
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    /// One benchmark, all four phases. Evaluations go through a fresh
    /// per-run cache layered on `evaluator`.
    pub fn run_benchmark(
        &self,
        evaluator: &dyn Evaluator,
        benchmark: &str,
    ) -> BenchmarkOutcome {
        let mut log = ExplorationLog::new();
        match self.search(evaluator, benchmark, &mut log) {
            Ok(r) => BenchmarkOutcome::Done(Box::new(r)),
            Err(error) => BenchmarkOutcome::Failed {
                benchmark: benchmark.to_owned(),
                error,
                log,
            },
        }
    }

    fn search(
        &self,
        evaluator: &dyn Evaluator,
        benchmark: &str,
        log: &mut ExplorationLog,
    ) -> Result<BenchmarkResult, ExploreError> {
        if !self.space.has_benchmark(benchmark) {
            return Err(ExploreError::UnknownBenchmark(benchmark.to_owned()));
        }
        let cache = Cached::new(evaluator);
        let search = BenchmarkSearch {
            space: self.space,
            benchmark,
            evaluator: &cache,
            weights: &self.weights,
        };
        let one = search.one_shot(log)?;
        let part = partition(&one.significance, self.space, self.threshold)?;
        let (after_exhaustive, f_exhaustive) =
            search.exhaustive(&part, &one.best, &one.normalization, log)?;
        let (best, objective) = search.greedy(
            &part,
            &one.significance,
            after_exhaustive,
            f_exhaustive,
            &one.normalization,
            log,
        )?;
        let metrics = cache.evaluate(self.space, &best, benchmark)?;
        Ok(BenchmarkResult {
            benchmark: benchmark.to_owned(),
            best,
            metrics,
            objective,
            significance: one.significance,
            partition: part,
            normalization: one.normalization,
            oneshot_best: one.best,
            exhaustive_objective: f_exhaustive,
            unique_evaluations: log.distinct_configs(benchmark) as u64,
            total_requests: log.len() as u64,
            log: std::mem::take(log),
        })
    }

    /// All benchmarks of the space; independent benchmarks run concurrently
    /// when the evaluator is reentrant.
    pub fn run(&self, evaluator: &dyn Evaluator) -> RunResult {
        let benches = self.space.benchmarks();
        let outcomes = if evaluator.is_reentrant() {
            benches
                .par_iter()
                .map(|b| self.run_benchmark(evaluator, b))
                .collect()
        } else {
            benches
                .iter()
                .map(|b| self.run_benchmark(evaluator, b))
                .collect()
        };
        let mut result = RunResult {
            threshold: self.threshold,
            weights: self.weights.clone(),
            outcomes,
        };
        renumber(&mut result);
        result
    }
}

fn renumber(result: &mut RunResult) {
    let mut seq = 0;
    for o in &mut result.outcomes {
        let log = match o {
            BenchmarkOutcome::Done(r) => &mut r.log,
            BenchmarkOutcome::Failed { log, .. } => log,
        };
        for r in &mut log.records {
            r.seq = seq;
            seq += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::{Parameter, Setting};
    use crate::evaluators::SepMonoEvaluator;
    use crate::fixtures::{tiny_space, TinyEvaluator};
    use crate::objective::Profile;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn space_of(shape: &[usize]) -> DesignSpace {
        let params = shape
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                Parameter::new(format!("p{i}"), (0..l as i64).map(Setting::Int).collect())
            })
            .collect();
        DesignSpace::new(params, vec!["b".into()]).unwrap()
    }

    fn tiny_search<'a>(
        space: &'a DesignSpace,
        ev: &'a dyn Evaluator,
        w: &'a WeightVector,
    ) -> BenchmarkSearch<'a> {
        BenchmarkSearch {
            space,
            benchmark: "t",
            evaluator: ev,
            weights: w,
        }
    }

    #[test]
    fn tiny_one_shot() {
        let space = tiny_space();
        let ev = Cached::new(TinyEvaluator::default());
        let w = Profile::HighPerf.weights();
        let mut log = ExplorationLog::new();
        let one = tiny_search(&space, &ev, &w).one_shot(&mut log).unwrap();
        assert_abs_diff_eq!(one.significance.get(0).unwrap(), -0.5549, epsilon = 1e-3);
        assert_abs_diff_eq!(one.significance.get(1).unwrap(), -0.0255, epsilon = 1e-3);
        assert_eq!(space.describe(&one.best), "A=4,B=200");
        assert_eq!(log.len(), 3);
        let got: Vec<_> = log.records().iter().map(|r| space.describe(&r.config)).collect();
        assert_eq!(got, ["A=1,B=100", "A=4,B=100", "A=1,B=200"]);
        assert_eq!(one.normalization.maxima["power"], 2.2);
        assert_eq!(one.normalization.maxima["time"], 26.0);
    }

    #[test]
    fn all_single_settings() {
        let space = space_of(&[1, 1, 1]);
        let ev = Cached::new(SepMonoEvaluator);
        let explorer = Explorer::new(&space, Profile::LowPower.weights(), 10).unwrap();
        let run = explorer.run(&ev);
        let r = run.get("b").unwrap();
        assert!(r.significance.is_empty());
        assert_eq!(r.best, space.first_config());
        assert_eq!(r.unique_evaluations, 1);
        assert_eq!(ev.inner_calls(), 1);
    }

    #[test]
    fn sepmono_power_only_prefers_first() {
        let space = space_of(&[3, 4, 2, 5]);
        let ev = SepMonoEvaluator;
        let w = WeightVector::new([("power", 1.0), ("time", 0.0)]);
        let mut log = ExplorationLog::new();
        let search = BenchmarkSearch {
            space: &space,
            benchmark: "b",
            evaluator: &ev,
            weights: &w,
        };
        let one = search.one_shot(&mut log).unwrap();
        assert!(one.significance.entries().iter().all(|&(_, d)| d > 0.0));
        assert_eq!(one.best, space.first_config());
        for t in [1, 5, 30, 1000] {
            let part = partition(&one.significance, &space, t).unwrap();
            let (winner, _) = search
                .exhaustive(&part, &one.best, &one.normalization, &mut log)
                .unwrap();
            for &p in &part.exhaustive {
                assert_eq!(winner.0[p], 0);
            }
        }
    }

    #[test]
    fn partition_small_space_shape() {
        let space = space_of(&[3, 4, 5, 5, 3, 3]);
        let sig = Significance::new((0..6).map(|i| (i, -(10.0 - i as f64))).collect());
        let p = partition(&sig, &space, 150).unwrap();
        assert_eq!(p.exhaustive, vec![0, 1, 2]);
        assert_eq!(p.exhaustive_size, 60);
        assert_eq!(p.greedy, vec![3, 4]);
        assert_eq!(p.oneshot, vec![5]);
        assert!(p.warning.is_none());
    }

    #[test]
    fn partition_tiny() {
        let space = tiny_space();
        let sig = Significance::new(vec![(0, -0.5549), (1, -0.0255)]);
        let p = partition(&sig, &space, 3).unwrap();
        assert_eq!((p.exhaustive.clone(), p.greedy.clone()), (vec![0], vec![1]));
        assert!(p.oneshot.is_empty());
    }

    #[test]
    fn partition_threshold_one() {
        let space = space_of(&[2, 3, 2, 4, 2]);
        let sig = Significance::new((0..5).map(|i| (i, i as f64)).collect());
        let p = partition(&sig, &space, 1).unwrap();
        assert!(p.exhaustive.is_empty());
        assert!(p.warning.is_some());
        assert_eq!(p.greedy, vec![4, 3, 2]);
        assert_eq!(p.oneshot, vec![1, 0]);
        assert_eq!(
            partition(&sig, &space, 0).unwrap_err(),
            ExploreError::InvalidThreshold
        );
    }

    #[test]
    fn partition_ties_keep_declaration_order() {
        
        let sig = Significance::new(vec![(0, 0.1), (1, -0.3), (2, 0.3), (3, 0.1)]);
        assert_eq!(sig.ranked(), vec![1, 2, 0, 3]);
    }

    #[test]
    fn tiny_exhaustive_and_greedy() {
        let space = tiny_space();
        let ev = Cached::new(TinyEvaluator::default());
        let w = Profile::HighPerf.weights();
        let search = tiny_search(&space, &ev, &w);
        let mut log = ExplorationLog::new();
        let one = search.one_shot(&mut log).unwrap();
        let part = partition(&one.significance, &space, 3).unwrap();
        let (b, f) = search
            .exhaustive(&part, &one.best, &one.normalization, &mut log)
            .unwrap();
        let fs: Vec<f64> = log.records()[3..].iter().map(|r| r.objective).collect();
        assert_abs_diff_eq!(fs[0], 0.9063, epsilon = 1e-3);
        assert_abs_diff_eq!(fs[1], 0.5136, epsilon = 1e-3);
        assert_abs_diff_eq!(fs[2], 0.3514, epsilon = 1e-3);
        assert_eq!(space.describe(&b), "A=4,B=200");
        assert_abs_diff_eq!(f, 0.3514, epsilon = 1e-3);
        assert_eq!(ev.unique(), 5);

        let (g, fg) = search
            .greedy(&part, &one.significance, b, f, &one.normalization, &mut log)
            .unwrap();
        assert_eq!(space.describe(&g), "A=4,B=200");
        assert_abs_diff_eq!(fg, 0.3514, epsilon = 1e-3);
        let walk: Vec<_> = log.records()[6..].iter().map(|r| space.describe(&r.config)).collect();
        assert_eq!(walk, ["A=4,B=200", "A=4,B=100"]);
        assert_abs_diff_eq!(log.records()[7].objective, 0.3769, epsilon = 1e-3);
        assert_eq!(ev.unique(), 5);
    }

    #[test]
    fn tiny_full_run() {
        let space = tiny_space();
        let ev = TinyEvaluator::default();
        let run = Explorer::new(&space, Profile::HighPerf.weights(), 3)
            .unwrap()
            .run(&ev);
        let r = run.get("t").unwrap();
        assert_eq!(space.describe(&r.best), "A=4,B=200");
        assert_abs_diff_eq!(r.objective, 0.3514, epsilon = 1e-3);
        assert_eq!(r.unique_evaluations, 5);
        assert_eq!(ev.calls(), 5);
        assert_eq!(r.metrics, MetricVector::new([("power", 2.4), ("time", 7.0)]));
    }

    #[test]
    fn two_setting_single_parameter() {
        let space = DesignSpace::new(
            vec![Parameter::new("x", vec![Setting::Text("a".into()), Setting::Text("b".into())])],
            vec!["b".into()],
        )
        .unwrap();
        for w in [Profile::LowPower.weights(), Profile::HighPerf.weights()] {
            let run = Explorer::new(&space, w.clone(), 1).unwrap().run(&SepMonoEvaluator);
            let r = run.get("b").unwrap();
            assert_eq!(r.unique_evaluations, 2);
            // lowpower -> idx 0 (power 0), highperf -> idx 1 (time 0)
            let expect = if w.get("power") > 0.5 { 0 } else { 1 };
            assert_eq!(r.best.0, vec![expect]);
        }
    }

    #[test]
    fn unknown_benchmark_isolated() {
        let space = tiny_space().with_benchmarks(vec!["t".into(), "u".into()]).unwrap();
        let run = Explorer::new(&space, Profile::HighPerf.weights(), 3)
            .unwrap()
            .run(&TinyEvaluator::default());
        assert!(run.get("t").is_some());
        let failures: Vec<_> = run.failures().collect();
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].0, "u");
        assert!(failures[0].1.to_string().contains("unknown benchmark"));
    }

    #[test]
    fn bad_weights_rejected() {
        let space = tiny_space();
        assert!(matches!(
            Explorer::new(&space, WeightVector::new([("power", 0.6), ("time", 0.6)]), 3),
            Err(ExploreError::InvalidWeights(_))
        ));
        let run = Explorer::new(&space, WeightVector::new([("energy", 1.0)]), 3)
            .unwrap()
            .run(&TinyEvaluator::default());
        assert!(matches!(
            run.failures().next().unwrap().1,
            ExploreError::InvalidWeights(_)
        ));
    }

    /// Greedy over a single free parameter with a frozen remainder.
    fn walk_prefix_minimum(values: &[f64], descending: bool) -> usize {
        // brute force: walk order, stop at first non-improvement
        let order: Vec<usize> = if descending {
            (0..values.len()).rev().collect()
        } else {
            (0..values.len()).collect()
        };
        let mut best = order[0];
        for w in order.windows(2) {
            if values[w[1]] < values[best] {
                best = w[1];
            } else {
                break;
            }
        }
        best
    }

    struct Lookup(Vec<f64>);

    impl Evaluator for Lookup {
        fn evaluate(&self, _: &DesignSpace, c: &Configuration, _: &str) -> Result<MetricVector, EvalError> {
            Ok(MetricVector::new([("power", self.0[c.0[0]]), ("time", 0.0)]))
        }
    }

    proptest! {
        #[test]
        fn greedy_halts_at_unimodal_minimum(len in 2usize..8, peak_seed in any::<u64>(), vals in prop::collection::vec(0.1f64..10.0, 8)) {
            // unimodal along the walk: strictly decreasing to a minimum, then strictly increasing
            let min_at = (peak_seed as usize) % len;
            let mut v = vec![0.0; len];
            v[min_at] = 1.0;
            for i in (0..min_at).rev() { v[i] = v[i + 1] + vals[i]; }
            for i in min_at + 1..len { v[i] = v[i - 1] + vals[i]; }
            let space = space_of(&[len]);
            let w = WeightVector::new([("power", 1.0), ("time", 0.0)]);
            let ev = Lookup(v.clone());
            let search = BenchmarkSearch { space: &space, benchmark: "b", evaluator: &ev, weights: &w };
            let mut log = ExplorationLog::new();
            let one = search.one_shot(&mut log).unwrap();
            let part = partition(&one.significance, &space, 1).unwrap();
            prop_assert_eq!(&part.greedy, &vec![0]);
            let (b, f) = search.exhaustive(&part, &one.best, &one.normalization, &mut log).unwrap();
            let (g, _) = search.greedy(&part, &one.significance, b, f, &one.normalization, &mut log).unwrap();
            let d = one.significance.get(0).unwrap();
            prop_assert_eq!(g.0[0], walk_prefix_minimum(&v, d < 0.0));
            prop_assert_eq!(g.0[0], min_at);
        }

        #[test]
        fn partition_invariants(
            shape in prop::collection::vec(1usize..=6, 1..=8),
            ds in prop::collection::vec(-1.0f64..1.0, 8),
            threshold in 1u64..2000,
        ) {
            let space = space_of(&shape);
            let tunable = space.tunable();
            let sig = Significance::new(tunable.iter().map(|&p| (p, (ds[p] * 4.0).round() / 4.0)).collect());
            let part = partition(&sig, &space, threshold).unwrap();
            let mut all: Vec<usize> = part.exhaustive.iter().chain(&part.greedy).chain(&part.oneshot).copied().collect();
            prop_assert_eq!(all.len(), tunable.len());
            all.sort();
            prop_assert_eq!(&all, &tunable);
            if !part.exhaustive.is_empty() {
                prop_assert!(part.exhaustive_size <= threshold);
            }
            prop_assert_eq!(part.exhaustive_size, space.cardinality_of(&part.exhaustive));
            prop_assert_eq!(part.greedy.len(), (tunable.len() - part.exhaustive.len()).div_ceil(2));
            let ranked: Vec<usize> = part.exhaustive.iter().chain(&part.greedy).chain(&part.oneshot).copied().collect();
            prop_assert_eq!(ranked, sig.ranked());
        }

        #[test]
        fn run_invariants(
            shape in prop::collection::vec(1usize..=5, 1..=5),
            threshold in 1u64..200,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let space = space_of(&shape);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let table: Vec<(f64, f64)> = (0..space.cardinality(None).unwrap()).map(|_| (rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0))).collect();
            struct Random<'a>(&'a [(f64, f64)], &'a DesignSpace);
            impl Evaluator for Random<'_> {
                fn evaluate(&self, s: &DesignSpace, c: &Configuration, _: &str) -> Result<MetricVector, EvalError> {
                    let mut i = 0;
                    for (p, &idx) in s.parameters().iter().zip(c.indices()) { i = i * p.len() + idx; }
                    let _ = self.1;
                    Ok(MetricVector::new([("power", self.0[i].0), ("time", self.0[i].1)]))
                }
            }
            let ev = Random(&table, &space);
            let explorer = Explorer::new(&space, Profile::HighPerf.weights(), threshold).unwrap();
            let run = explorer.run(&ev);
            let again = explorer.run(&ev);
            let r = run.get("b").unwrap();
            prop_assert!(r.unique_evaluations <= r.evaluation_bound(&space));
            prop_assert!(r.objective <= r.exhaustive_objective);
            for &(p, _) in r.significance.entries() {
                let idx = r.oneshot_best.0[p];
                prop_assert!(idx == 0 || idx == space.parameter(p).len() - 1);
            }
            prop_assert_eq!(run.log(), again.log());
            let seqs: Vec<u64> = run.log().records().iter().map(|r| r.seq).collect();
            prop_assert!(seqs.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
