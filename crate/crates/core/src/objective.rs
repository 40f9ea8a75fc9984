//! Metric vectors, weights, normalization and the weighted-sum objective.
//!
//! Every metric is minimized. Raw values are divided by the per-benchmark
//! maxima seen during the one-shot phase, so later phases may produce
//! normalized components above 1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Raw metric values keyed by metric name (sorted by name).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricVector(pub BTreeMap<String, f64>);

impl MetricVector {
    pub fn new<K: Into<String>>(pairs: impl IntoIterator<Item = (K, f64)>) -> Self {
        Self(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        self.0.get(metric).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.values().copied()
    }

    pub fn same_keys(&self, other: &MetricVector) -> bool {
        self.0.len() == other.0.len() && self.0.keys().zip(other.0.keys()).all(|(a, b)| a == b)
    }

    /// Values must be finite and non-negative.
    pub fn check(&self) -> Result<(), ObjectiveError> {
        for (k, &v) in &self.0 {
            if !v.is_finite() || v < 0.0 {
                return Err(ObjectiveError::BadMetric {
                    metric: k.clone(),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

/// Named weight profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    LowPower,
    HighPerf,
}

impl Profile {
    pub fn weights(self) -> WeightVector {
        match self {
            Profile::LowPower => WeightVector::new([("power", 0.9), ("time", 0.1)]),
            Profile::HighPerf => WeightVector::new([("power", 0.1), ("time", 0.9)]),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::LowPower => "lowpower",
            Profile::HighPerf => "highperf",
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = ObjectiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lowpower" => Ok(Profile::LowPower),
            "highperf" => Ok(Profile::HighPerf),
            other => Err(ObjectiveError::Parse(format!("unknown profile `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(pub BTreeMap<String, f64>);

impl WeightVector {
    pub fn new<K: Into<String>>(pairs: impl IntoIterator<Item = (K, f64)>) -> Self {
        Self(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    /// Parses `power=0.9,time=0.1`.
    pub fn parse(text: &str) -> Result<Self, ObjectiveError> {
        let mut out = BTreeMap::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| ObjectiveError::Parse(format!("expected name=value, got `{part}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| ObjectiveError::Parse(format!("bad weight `{v}`")))?;
            if out.insert(k.trim().to_owned(), v).is_some() {
                return Err(ObjectiveError::Parse(format!("weight `{k}` given twice")));
            }
        }
        Ok(Self(out))
    }

    pub fn get(&self, metric: &str) -> f64 {
        self.0.get(metric).copied().unwrap_or(0.0)
    }

    pub fn metric_names(&self) -> BTreeSet<String> {
        self.0.keys().cloned().collect()
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightViolation {
    OutOfRange { metric: String, weight: f64 },
    Sum(f64),
    Missing(String),
    Unknown(String),
}

impl fmt::Display for WeightViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightViolation::OutOfRange { metric, weight } => {
                write!(f, "weight for `{metric}` is {weight}, outside [0, 1]")
            }
            WeightViolation::Sum(s) => write!(f, "weights sum to {s}, expected 1"),
            WeightViolation::Missing(m) => write!(f, "no weight given for metric `{m}`"),
            WeightViolation::Unknown(m) => write!(f, "weight given for unknown metric `{m}`"),
        }
    }
}

pub fn validate_weights<'a>(
    weights: &WeightVector,
    metrics: impl IntoIterator<Item = &'a str>,
) -> Vec<WeightViolation> {
    let mut out = Vec::new();
    for (k, &w) in &weights.0 {
        if !(0.0..=1.0).contains(&w) {
            out.push(WeightViolation::OutOfRange {
                metric: k.clone(),
                weight: w,
            });
        }
    }
    let sum: f64 = weights.0.values().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        out.push(WeightViolation::Sum(sum));
    }
    let metrics: BTreeSet<&str> = metrics.into_iter().collect();
    for m in &metrics {
        if !weights.0.contains_key(*m) {
            out.push(WeightViolation::Missing((*m).to_owned()));
        }
    }
    for k in weights.0.keys() {
        if !metrics.contains(k.as_str()) {
            out.push(WeightViolation::Unknown(k.clone()));
        }
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("no normalization context for benchmark `{0}`")]
    UnknownBenchmark(String),
    #[error("no phase-1 records for benchmark `{0}`")]
    NoRecords(String),
    #[error("metric `{0}` missing from metric vector")]
    MissingMetric(String),
    #[error("metric key sets differ")]
    KeyMismatch,
    #[error("metric `{metric}` has invalid value {value}")]
    BadMetric { metric: String, value: f64 },
    #[error("metric `{metric}` was 0 throughout phase 1 but has weight {weight} and value {value}")]
    Degenerate {
        metric: String,
        weight: f64,
        value: f64,
    },
    #[error("{0}")]
    Parse(String),
}

/// Per-metric phase-1 maxima for one benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub maxima: BTreeMap<String, f64>,
    /// Metrics whose maximum was 0; their normalized value is defined as 0.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub degenerate: BTreeSet<String>,
}

impl Normalization {
    pub fn from_records<'a>(
        records: impl IntoIterator<Item = &'a MetricVector>,
    ) -> Option<Self> {
        let mut maxima: BTreeMap<String, f64> = BTreeMap::new();
        let mut any = false;
        for r in records {
            any = true;
            for (k, &v) in &r.0 {
                let e = maxima.entry(k.clone()).or_insert(v);
                if v > *e {
                    *e = v;
                }
            }
        }
        if !any {
            return None;
        }
        let degenerate = maxima
            .iter()
            .filter(|(_, &v)| v <= 0.0)
            .map(|(k, _)| k.clone())
            .collect();
        Some(Self { maxima, degenerate })
    }

    pub fn normalize(&self, v: &MetricVector) -> Result<MetricVector, ObjectiveError> {
        let mut out = BTreeMap::new();
        for (k, &max) in &self.maxima {
            let raw = v
                .get(k)
                .ok_or_else(|| ObjectiveError::MissingMetric(k.clone()))?;
            let n = if max > 0.0 {
                raw / max
            } else if raw == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            out.insert(k.clone(), n);
        }
        Ok(MetricVector(out))
    }

    /// Weighted sum of normalized metrics.
    pub fn objective(&self, v: &MetricVector, w: &WeightVector) -> Result<f64, ObjectiveError> {
        let mut f = 0.0;
        for (k, &weight) in &w.0 {
            let raw = v
                .get(k)
                .ok_or_else(|| ObjectiveError::MissingMetric(k.clone()))?;
            let max = *self
                .maxima
                .get(k)
                .ok_or_else(|| ObjectiveError::MissingMetric(k.clone()))?;
            if max > 0.0 {
                f += weight * (raw / max);
            } else if raw != 0.0 && weight > 0.0 {
                return Err(ObjectiveError::Degenerate {
                    metric: k.clone(),
                    weight,
                    value: raw,
                });
            }
        }
        Ok(f)
    }
}

/// Normalization for every benchmark of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormalizationContext(pub BTreeMap<String, Normalization>);

impl NormalizationContext {
    pub fn get(&self, benchmark: &str) -> Result<&Normalization, ObjectiveError> {
        self.0
            .get(benchmark)
            .ok_or_else(|| ObjectiveError::UnknownBenchmark(benchmark.to_owned()))
    }
}

/// Per-benchmark, per-metric maxima over phase-1 records.
pub fn build_context(
    records: &[(String, MetricVector)],
    benchmarks: &[String],
) -> Result<NormalizationContext, ObjectiveError> {
    let mut ctx = NormalizationContext::default();
    for b in benchmarks {
        let norm = Normalization::from_records(
            records.iter().filter(|(name, _)| name == b).map(|(_, v)| v),
        )
        .ok_or_else(|| ObjectiveError::NoRecords(b.clone()))?;
        ctx.0.insert(b.clone(), norm);
    }
    Ok(ctx)
}

pub fn objective(
    v: &MetricVector,
    ctx: &NormalizationContext,
    benchmark: &str,
    w: &WeightVector,
) -> Result<f64, ObjectiveError> {
    ctx.get(benchmark)?.objective(v, w)
}
