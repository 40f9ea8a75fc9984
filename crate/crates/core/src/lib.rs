//! Design space exploration for discrete black-box parameter tuning.
//!
//! The search runs four phases per benchmark: a one-shot sweep that ranks
//! parameters by significance, a partition of the ranked parameters under an
//! exhaustive-search threshold, an exhaustive search over the most
//! significant subset, and a greedy walk over the next tier. [`pareto`] and
//! [`oracle`] analyse the resulting evaluation log against a full
//! enumeration.

pub mod design_space;
pub mod evaluators;
pub mod explorer;
pub mod fixtures;
pub mod objective;
pub mod oracle;
pub mod pareto;

pub use design_space::{Configuration, DesignSpace, Parameter, PartialConfiguration, Setting};
pub use evaluators::{Cached, EvalError, Evaluator, EvaluatorSpec};
pub use explorer::{
    BenchmarkResult, ExplorationLog, ExploreError, Explorer, LogRecord, Partition, Phase,
    RunResult, Significance,
};
pub use objective::{MetricVector, NormalizationContext, Profile, WeightVector};
pub use oracle::{ComparisonReport, OracleResult};
pub use pareto::ParetoFront;
