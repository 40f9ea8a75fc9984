//! CSV replay backend.
//!
//! Header: `benchmark,<param names...>,<metric names...>`. Columns whose
//! names match a space parameter are parameters; every other column after
//! `benchmark` is a metric.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use super::{EvalError, Evaluator};
use crate::design_space::{Configuration, DesignSpace};
use crate::objective::MetricVector;

#[derive(Debug, Clone)]
pub struct TableEvaluator {
    rows: HashMap<(String, Configuration), MetricVector>,
    benchmarks: BTreeSet<String>,
}

impl TableEvaluator {
    pub fn load(path: impl AsRef<Path>, space: &DesignSpace) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| EvalError::Table(format!("{}: {e}", path.display())))?;
        Self::from_reader(file, space)
    }

    pub fn from_reader(reader: impl Read, space: &DesignSpace) -> Result<Self, EvalError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| EvalError::Table(e.to_string()))?
            .clone();
        if headers.get(0) != Some("benchmark") {
            return Err(EvalError::Table("first column must be `benchmark`".into()));
        }
        let mut param_cols = vec![None; space.len()];
        let mut metric_cols = Vec::new();
        for (col, name) in headers.iter().enumerate().skip(1) {
            match space.index_of(name) {
                Ok(p) => {
                    if param_cols[p].replace(col).is_some() {
                        return Err(EvalError::Table(format!("column `{name}` repeated")));
                    }
                }
                Err(_) => metric_cols.push((col, name.to_owned())),
            }
        }
        for (p, col) in param_cols.iter().enumerate() {
            if col.is_none() {
                return Err(EvalError::Table(format!(
                    "missing column for parameter `{}`",
                    space.parameter(p).name
                )));
            }
        }
        if metric_cols.is_empty() {
            return Err(EvalError::Table("no metric columns".into()));
        }

        let mut rows = HashMap::new();
        let mut benchmarks = BTreeSet::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| EvalError::Table(e.to_string()))?;
            let row = line + 2;
            let cell = |col: usize| record.get(col).unwrap_or("");
            let bench = cell(0).to_owned();
            let mut idx = Vec::with_capacity(space.len());
            for (p, col) in param_cols.iter().enumerate() {
                let text = cell(col.expect("checked above"));
                let pos = space.parameter(p).position_by_text(text).ok_or_else(|| {
                    EvalError::Table(format!(
                        "row {row}: `{text}` is not a setting of `{}`",
                        space.parameter(p).name
                    ))
                })?;
                idx.push(pos);
            }
            let mut metrics = MetricVector::default();
            for (col, name) in &metric_cols {
                let v: f64 = cell(*col).parse().map_err(|_| {
                    EvalError::Table(format!("row {row}: bad value for metric `{name}`"))
                })?;
                metrics.0.insert(name.clone(), v);
            }
            metrics
                .check()
                .map_err(|e| EvalError::Table(format!("row {row}: {e}")))?;
            let config = Configuration(idx);
            let desc = space.describe(&config);
            benchmarks.insert(bench.clone());
            if rows.insert((bench.clone(), config), metrics).is_some() {
                return Err(EvalError::Table(format!(
                    "row {row}: duplicate row for benchmark `{bench}`, {desc}"
                )));
            }
        }
        Ok(Self { rows, benchmarks })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl Evaluator for TableEvaluator {
    fn evaluate(
        &self,
        space: &DesignSpace,
        config: &Configuration,
        benchmark: &str,
    ) -> Result<MetricVector, EvalError> {
        if !self.benchmarks.contains(benchmark) {
            return Err(EvalError::UnknownBenchmark(benchmark.to_owned()));
        }
        self.rows
            .get(&(benchmark.to_owned(), config.clone()))
            .cloned()
            .ok_or_else(|| EvalError::NotInTable {
                benchmark: benchmark.to_owned(),
                config: space.describe(config),
            })
    }
}
