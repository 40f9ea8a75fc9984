//! Full enumeration baseline and methodology-vs-oracle comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design_space::{Configuration, DesignSpace};
use crate::evaluators::{EvalError, Evaluator};
use crate::explorer::{BenchmarkResult, ExplorationLog, RunResult};
use crate::objective::{MetricVector, Normalization, ObjectiveError, WeightVector};

pub const DEFAULT_GUARD: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("space has {cardinality} configurations, above the enumeration guard of {guard}")]
    Guard { cardinality: u64, guard: u64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub benchmark: String,
    pub best: Configuration,
    pub metrics: MetricVector,
    pub objective: f64,
    pub evaluations: u64,
}

/// Evaluates every configuration in enumeration order and keeps the
/// strictly smallest objective (lowest index on ties). Objectives use the
/// caller's normalization so results compare with a methodology run.
pub fn oracle_search(
    space: &DesignSpace,
    benchmark: &str,
    evaluator: &dyn Evaluator,
    weights: &WeightVector,
    norm: &Normalization,
    guard: u64,
) -> Result<OracleResult, OracleError> {
    let cardinality = space.cardinality_of(&(0..space.len()).collect::<Vec<_>>());
    if cardinality > guard {
        return Err(OracleError::Guard { cardinality, guard });
    }
    let configs: Vec<Configuration> = space.enumerate_all().collect();
    let score = |c: &Configuration| -> Result<(f64, MetricVector), OracleError> {
        let v = evaluator.evaluate(space, c, benchmark)?;
        Ok((norm.objective(&v, weights)?, v))
    };
    let scored: Vec<(f64, MetricVector)> = if evaluator.is_reentrant() {
        configs.par_iter().map(score).collect::<Result<_, _>>()?
    } else {
        configs.iter().map(score).collect::<Result<_, _>>()?
    };
    let mut best = 0;
    for (i, (f, _)) in scored.iter().enumerate() {
        if *f < scored[best].0 {
            best = i;
        }
    }
    let (objective, metrics) = scored[best].clone();
    Ok(OracleResult {
        benchmark: benchmark.to_owned(),
        best: configs[best].clone(),
        metrics,
        objective,
        evaluations: configs.len() as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Side {
    pub config: BTreeMap<String, serde_json::Value>,
    pub metrics: MetricVector,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkComparison {
    pub benchmark: String,
    pub oracle: Side,
    pub methodology: Side,
    /// `100 * (methodology - oracle) / oracle` per metric.
    pub metric_gap_percent: BTreeMap<String, f64>,
    /// `100 * (F_methodology - F_oracle) / F_oracle`.
    pub objective_gap_percent: f64,
    pub unique_evaluations: u64,
    pub cardinality: u64,
    pub explored_percent: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ComparisonReport {
    pub weights: WeightVector,
    pub threshold: u64,
    pub benchmarks: Vec<BenchmarkComparison>,
    /// Per-benchmark unique evaluations summed over benchmarks.
    pub total_unique_evaluations: u64,
}

fn gap(new: f64, base: f64) -> f64 {
    if base == 0.0 {
        if new == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        100.0 * (new - base) / base
    }
}

fn side(space: &DesignSpace, config: &Configuration, metrics: &MetricVector, f: f64) -> Side {
    Side {
        config: space.config_json(config).into_iter().collect(),
        metrics: metrics.clone(),
        objective: f,
    }
}

/// Compares one benchmark's methodology result with its oracle. `log` is the
/// methodology log; every logged objective must be >= the oracle's.
pub fn compare_benchmark(
    space: &DesignSpace,
    run: &BenchmarkResult,
    oracle: &OracleResult,
    log: Option<&ExplorationLog>,
) -> Result<BenchmarkComparison, OracleError> {
    if run.benchmark != oracle.benchmark {
        return Err(OracleError::Mismatch(format!(
            "benchmark `{}` vs `{}`",
            run.benchmark, oracle.benchmark
        )));
    }
    if !run.metrics.same_keys(&oracle.metrics) {
        return Err(OracleError::Mismatch("metric sets differ".into()));
    }
    const SLACK: f64 = 1e-12;
    if run.objective + SLACK < oracle.objective {
        return Err(OracleError::Mismatch(format!(
            "methodology objective {} beats the oracle's {}; runs do not share inputs",
            run.objective, oracle.objective
        )));
    }
    if let Some(log) = log {
        if let Some(r) = log
            .for_benchmark(&run.benchmark)
            .find(|r| r.objective + SLACK < oracle.objective)
        {
            return Err(OracleError::Mismatch(format!(
                "logged objective {} (seq {}) beats the oracle's {}",
                r.objective, r.seq, oracle.objective
            )));
        }
    }
    let metric_gap_percent = run
        .metrics
        .0
        .iter()
        .map(|(k, &v)| (k.clone(), gap(v, oracle.metrics.0[k])))
        .collect();
    let cardinality = space.cardinality_of(&(0..space.len()).collect::<Vec<_>>());
    let unique = run.unique_evaluations.max(1);
    Ok(BenchmarkComparison {
        benchmark: run.benchmark.clone(),
        oracle: side(space, &oracle.best, &oracle.metrics, oracle.objective),
        methodology: side(space, &run.best, &run.metrics, run.objective),
        metric_gap_percent,
        objective_gap_percent: gap(run.objective, oracle.objective),
        unique_evaluations: run.unique_evaluations,
        cardinality,
        explored_percent: 100.0 * unique as f64 / cardinality as f64,
        speedup: cardinality as f64 / unique as f64,
    })
}

/// Oracle for every successful benchmark of `run`, reusing its normalization.
pub fn oracle_for_run(
    space: &DesignSpace,
    run: &RunResult,
    evaluator: &dyn Evaluator,
    guard: u64,
) -> Result<Vec<OracleResult>, OracleError> {
    run.results()
        .map(|r| oracle_search(space, &r.benchmark, evaluator, &run.weights, &r.normalization, guard))
        .collect()
}

/// Report over every benchmark present in both `run` and `oracles`.
pub fn compare(
    space: &DesignSpace,
    run: &RunResult,
    oracles: &[OracleResult],
) -> Result<ComparisonReport, OracleError> {
    let mut rows = Vec::new();
    for r in run.results() {
        let o = oracles
            .iter()
            .find(|o| o.benchmark == r.benchmark)
            .ok_or_else(|| OracleError::Mismatch(format!("no oracle for `{}`", r.benchmark)))?;
        rows.push(compare_benchmark(space, r, o, Some(&r.log))?);
    }
    Ok(ComparisonReport::new(run.weights.clone(), run.threshold, rows))
}

impl ComparisonReport {
    pub fn new(weights: WeightVector, threshold: u64, benchmarks: Vec<BenchmarkComparison>) -> Self {
        let total_unique_evaluations = benchmarks.iter().map(|b| b.unique_evaluations).sum();
        Self {
            weights,
            threshold,
            benchmarks,
            total_unique_evaluations,
        }
    }

    /// Aligned text: one block per benchmark, rows are parameters then
    /// metrics, columns are oracle and methodology values.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "weights: {}   threshold: {}", self.weights, self.threshold);
        for b in &self.benchmarks {
            let mut rows: Vec<(String, String, String)> = vec![(
                "parameter".into(),
                "oracle".into(),
                "methodology".into(),
            )];
            for (k, v) in &b.oracle.config {
                let m = b.methodology.config.get(k).map(cell).unwrap_or_default();
                rows.push((k.clone(), cell(v), m));
            }
            for (k, v) in &b.oracle.metrics.0 {
                let m = b.methodology.metrics.get(k).unwrap_or(f64::NAN);
                rows.push((k.clone(), format!("{v:.4}"), format!("{m:.4}")));
            }
            rows.push((
                "objective".into(),
                format!("{:.4}", b.oracle.objective),
                format!("{:.4}", b.methodology.objective),
            ));
            let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
            let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
            let w2 = rows.iter().map(|r| r.2.len()).max().unwrap_or(0);
            let _ = writeln!(out, "\n[{}]", b.benchmark);
            for (i, (a, o, m)) in rows.iter().enumerate() {
                let _ = writeln!(out, "{a:<w0$}  {o:>w1$}  {m:>w2$}");
                if i == 0 {
                    let _ = writeln!(out, "{}", "-".repeat(w0 + w1 + w2 + 4));
                }
            }
            let gaps: Vec<String> = b
                .metric_gap_percent
                .iter()
                .map(|(k, g)| format!("{k} {g:+.2}%"))
                .collect();
            let _ = writeln!(
                out,
                "gap: {}, objective {:+.2}%; explored {} of {} ({:.2}%), speedup {:.2}x",
                gaps.join(", "),
                b.objective_gap_percent,
                b.unique_evaluations,
                b.cardinality,
                b.explored_percent,
                b.speedup
            );
        }
        let _ = writeln!(out, "\ntotal unique evaluations: {}", self.total_unique_evaluations);
        out
    }
}

fn cell(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::{Parameter, Setting};
    use crate::evaluators::SepMonoEvaluator;
    use crate::explorer::Explorer;
    use crate::fixtures::{tiny_space, TinyEvaluator};
    use crate::objective::Profile;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tiny_oracle_and_comparison() {
        let space = tiny_space();
        let ev = TinyEvaluator::default();
        let w = Profile::HighPerf.weights();
        let run = Explorer::new(&space, w.clone(), 3).unwrap().run(&ev);
        let r = run.get("t").unwrap();
        let o = oracle_search(&space, "t", &ev, &w, &r.normalization, DEFAULT_GUARD).unwrap();
        assert_eq!(space.describe(&o.best), "A=4,B=200");
        assert_abs_diff_eq!(o.objective, 0.3514, epsilon = 1e-3);
        assert_eq!(o.evaluations, 6);

        let c = compare_benchmark(&space, r, &o, Some(&r.log)).unwrap();
        assert_eq!(c.metric_gap_percent["power"], 0.0);
        assert_eq!(c.metric_gap_percent["time"], 0.0);
        assert_eq!(c.objective_gap_percent, 0.0);
        assert_abs_diff_eq!(c.explored_percent, 83.333, epsilon = 1e-3);
        assert_abs_diff_eq!(c.speedup, 1.2, epsilon = 1e-12);
        assert_eq!(c.speedup * c.unique_evaluations as f64, c.cardinality as f64);
        let text = ComparisonReport::new(w, 3, vec![c]).to_text();
        assert!(text.contains("[t]"));
        assert!(text.contains("speedup 1.20x"));
    }

    #[test]
    fn sepmono_lowpower_is_all_first() {
        let params = [3usize, 4, 5]
            .iter()
            .enumerate()
            .map(|(i, &l)| Parameter::new(format!("p{i}"), (0..l as i64).map(Setting::Int).collect()))
            .collect();
        let space = DesignSpace::new(params, vec!["b".into()]).unwrap();
        let norm = Normalization::from_records([&MetricVector::new([("power", 3.0), ("time", 3.0)])]).unwrap();
        let o = oracle_search(&space, "b", &SepMonoEvaluator, &Profile::LowPower.weights(), &norm, DEFAULT_GUARD).unwrap();
        assert_eq!(o.best, space.first_config());
    }

    #[test]
    fn guard_refuses() {
        let params = vec![
            Parameter::new("a", (0..3).map(Setting::Int).collect()),
            Parameter::new("b", (0..4).map(Setting::Int).collect()),
        ];
        let space = DesignSpace::new(params, vec!["b".into()]).unwrap();
        let norm = Normalization::from_records([&MetricVector::new([("power", 1.0), ("time", 1.0)])]).unwrap();
        let err = oracle_search(&space, "b", &SepMonoEvaluator, &Profile::LowPower.weights(), &norm, 10).unwrap_err();
        assert_eq!(err, OracleError::Guard { cardinality: 12, guard: 10 });
    }

    #[test]
    fn five_percent_gap() {
        assert_abs_diff_eq!(gap(1.05 * 3.0, 3.0), 5.0, epsilon = 1e-9);
        assert_eq!(gap(2.0, 2.0), 0.0);
        assert!(gap(-1.0, 2.0) < 0.0);
    }
}
