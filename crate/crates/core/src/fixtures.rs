//! Small shared fixtures for tests, benches and examples.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::design_space::{Configuration, DesignSpace, Parameter, Setting};
use crate::evaluators::{EvalError, Evaluator};
use crate::objective::MetricVector;

/// `A = {1, 2, 4}`, `B = {100, 200}`, single benchmark `t`.
pub fn tiny_space() -> DesignSpace {
    DesignSpace::new(
        vec![
            Parameter::new("A", vec![Setting::Int(1), Setting::Int(2), Setting::Int(4)]),
            Parameter::new("B", vec![Setting::Int(100), Setting::Int(200)]),
        ],
        vec!["t".into()],
    )
    .expect("tiny space is valid")
}

pub const TINY_SPACE_JSON: &str = r#"{
  "parameters": [
    {"name": "A", "settings": [1, 2, 4]},
    {"name": "B", "settings": [100, 200]}
  ],
  "benchmarks": ["t"]
}
"#;

/// `power = 0.5 a + 0.002 b`, `time = 24 / a + 200 / b` for every TINY point.
pub const TINY_TABLE_CSV: &str = "benchmark,A,B,power,time
t,1,100,0.7,26
t,1,200,0.9,25
t,2,100,1.2,14
t,2,200,1.4,13
t,4,100,2.2,8
t,4,200,2.4,7
";

/// TINY formulas evaluated directly, counting calls.
#[derive(Debug, Default)]
pub struct TinyEvaluator {
    calls: AtomicU64,
}

impl TinyEvaluator {
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Evaluator for TinyEvaluator {
    fn evaluate(
        &self,
        space: &DesignSpace,
        config: &Configuration,
        benchmark: &str,
    ) -> Result<MetricVector, EvalError> {
        if benchmark != "t" {
            return Err(EvalError::UnknownBenchmark(benchmark.to_owned()));
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        let a = space.value(config, 0).as_f64().unwrap_or(0.0);
        let b = space.value(config, 1).as_f64().unwrap_or(0.0);
        Ok(MetricVector::new([
            ("power", 0.5 * a + 0.002 * b),
            ("time", 24.0 / a + 200.0 / b),
        ]))
    }
}
