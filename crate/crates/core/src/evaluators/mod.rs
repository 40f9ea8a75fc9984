//! Black-box evaluation backends and the memoizing cache.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use thiserror::Error;

use crate::design_space::{Configuration, DesignSpace};
use crate::objective::MetricVector;

mod external;
mod sepmono;
mod synthetic;
mod table;

pub use external::{ExternalEvaluator, DEFAULT_TIMEOUT};
pub use sepmono::SepMonoEvaluator;
pub use synthetic::{SyntheticEvaluator, SyntheticProfile, BUILTIN_PROFILES};
pub use table::TableEvaluator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
    #[error("configuration lacks required parameter `{0}`")]
    MissingParameter(String),
    #[error("parameter `{parameter}` has non-numeric value `{value}`")]
    NonNumeric { parameter: String, value: String },
    #[error("configuration not in table: benchmark `{benchmark}`, {config}")]
    NotInTable { benchmark: String, config: String },
    #[error("table load error: {0}")]
    Table(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("evaluator terminated")]
    Terminated,
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("evaluator timed out after {0:?}")]
    Timeout(Duration),
    #[error("evaluator I/O error: {0}")]
    Io(String),
    #[error("invalid evaluator spec: {0}")]
    Spec(String),
}

/// Produces raw metrics for a (configuration, benchmark) pair.
///
/// Built-in backends are pure: the same input always yields bit-identical
/// output.
pub trait Evaluator: Send + Sync {
    fn evaluate(
        &self,
        space: &DesignSpace,
        config: &Configuration,
        benchmark: &str,
    ) -> Result<MetricVector, EvalError>;

    /// `false` for backends that serialize calls internally; the explorer then
    /// skips parallel dispatch.
    fn is_reentrant(&self) -> bool {
        true
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate(
        &self,
        space: &DesignSpace,
        config: &Configuration,
        benchmark: &str,
    ) -> Result<MetricVector, EvalError> {
        (**self).evaluate(space, config, benchmark)
    }

    fn is_reentrant(&self) -> bool {
        (**self).is_reentrant()
    }
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn evaluate(
        &self,
        space: &DesignSpace,
        config: &Configuration,
        benchmark: &str,
    ) -> Result<MetricVector, EvalError> {
        (**self).evaluate(space, config, benchmark)
    }

    fn is_reentrant(&self) -> bool {
        (**self).is_reentrant()
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Arc<E> {
    fn evaluate(
        &self,
        space: &DesignSpace,
        config: &Configuration,
        benchmark: &str,
    ) -> Result<MetricVector, EvalError> {
        (**self).evaluate(space, config, benchmark)
    }

    fn is_reentrant(&self) -> bool {
        (**self).is_reentrant()
    }
}

type CacheKey = (String, Configuration);
type Slot = Arc<Mutex<Option<MetricVector>>>;

/// Memoizes successful evaluations keyed by (benchmark, configuration).
///
/// Concurrent requests for the same key wait on a per-key slot, so the inner
/// backend sees at most one call per key at a time. Errors are not cached.
pub struct Cached<E> {
    inner: E,
    slots: Mutex<HashMap<CacheKey, Slot>>,
    unique: AtomicU64,
    total: AtomicU64,
    inner_calls: AtomicU64,
}

impl<E: Evaluator> Cached<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            slots: Mutex::new(HashMap::new()),
            unique: AtomicU64::new(0),
            total: AtomicU64::new(0),
            inner_calls: AtomicU64::new(0),
        }
    }

    /// Distinct keys successfully evaluated.
    pub fn unique(&self) -> u64 {
        self.unique.load(Ordering::Relaxed)
    }

    /// Requests served, hits included.
    pub fn total(&self) -> u64 {
        self.total.load(Ordering::Relaxed)
    }

    pub fn inner_calls(&self) -> u64 {
        self.inner_calls.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Evaluator> Evaluator for Cached<E> {
    fn evaluate(
        &self,
        space: &DesignSpace,
        config: &Configuration,
        benchmark: &str,
    ) -> Result<MetricVector, EvalError> {
        self.total.fetch_add(1, Ordering::Relaxed);
        let slot = {
            let mut slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
            slots
                .entry((benchmark.to_owned(), config.clone()))
                .or_default()
                .clone()
        };
        let mut guard = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(v) = guard.as_ref() {
            return Ok(v.clone());
        }
        self.inner_calls.fetch_add(1, Ordering::Relaxed);
        let v = self.inner.evaluate(space, config, benchmark)?;
        *guard = Some(v.clone());
        self.unique.fetch_add(1, Ordering::Relaxed);
        Ok(v)
    }

    fn is_reentrant(&self) -> bool {
        self.inner.is_reentrant()
    }
}

/// Textual evaluator selector: `synthetic[:<profile>]`, `sepmono`,
/// `table:<csv path>`, `exec:<command line>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvaluatorSpec {
    Synthetic(Option<String>),
    SepMono,
    Table(PathBuf),
    Exec(String),
}

impl FromStr for EvaluatorSpec {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, arg) {
            ("synthetic", None) => Ok(EvaluatorSpec::Synthetic(None)),
            ("synthetic", Some(p)) => {
                if SyntheticProfile::builtin(p).is_none() {
                    return Err(EvalError::Spec(format!("unknown synthetic profile `{p}`")));
                }
                Ok(EvaluatorSpec::Synthetic(Some(p.to_owned())))
            }
            ("sepmono", None) => Ok(EvaluatorSpec::SepMono),
            ("table", Some(p)) if !p.is_empty() => Ok(EvaluatorSpec::Table(PathBuf::from(p))),
            ("exec", Some(c)) if !c.trim().is_empty() => Ok(EvaluatorSpec::Exec(c.to_owned())),
            _ => Err(EvalError::Spec(format!("cannot parse `{s}`"))),
        }
    }
}

impl fmt::Display for EvaluatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvaluatorSpec::Synthetic(None) => f.write_str("synthetic"),
            EvaluatorSpec::Synthetic(Some(p)) => write!(f, "synthetic:{p}"),
            EvaluatorSpec::SepMono => f.write_str("sepmono"),
            EvaluatorSpec::Table(p) => write!(f, "table:{}", p.display()),
            EvaluatorSpec::Exec(c) => write!(f, "exec:{c}"),
        }
    }
}

impl EvaluatorSpec {
    pub fn build(
        &self,
        space: &DesignSpace,
        timeout: Duration,
    ) -> Result<Box<dyn Evaluator>, EvalError> {
        Ok(match self {
            EvaluatorSpec::Synthetic(None) => Box::new(SyntheticEvaluator::by_benchmark_name()),
            EvaluatorSpec::Synthetic(Some(p)) => Box::new(SyntheticEvaluator::uniform(
                SyntheticProfile::builtin(p)
                    .ok_or_else(|| EvalError::Spec(format!("unknown synthetic profile `{p}`")))?,
                space.benchmarks(),
            )),
            EvaluatorSpec::SepMono => Box::new(SepMonoEvaluator),
            EvaluatorSpec::Table(path) => Box::new(TableEvaluator::load(path, space)?),
            EvaluatorSpec::Exec(cmd) => Box::new(ExternalEvaluator::spawn(cmd, timeout)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{tiny_space, TinyEvaluator};
    use proptest::prelude::*;
    use std::collections::HashSet;
    use std::sync::atomic::AtomicBool;

    #[test]
    fn repeated_request_hits_cache() {
        let space = tiny_space();
        let cache = Cached::new(TinyEvaluator::default());
        let c = Configuration(vec![0, 0]);
        let a = cache.evaluate(&space, &c, "t").unwrap();
        let b = cache.evaluate(&space, &c, "t").unwrap();
        assert_eq!(a, b);
        assert_eq!(cache.inner().calls(), 1);
        assert_eq!((cache.unique(), cache.total()), (1, 2));
    }

    struct FlakyOnce {
        failed: AtomicBool,
        calls: AtomicU64,
    }

    impl Evaluator for FlakyOnce {
        fn evaluate(&self, _: &DesignSpace, _: &Configuration, _: &str) -> Result<MetricVector, EvalError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if !self.failed.swap(true, Ordering::SeqCst) {
                return Err(EvalError::Evaluation("boom".into()));
            }
            Ok(MetricVector::new([("power", 1.0), ("time", 1.0)]))
        }
    }

    #[test]
    fn errors_are_not_cached() {
        let space = tiny_space();
        let cache = Cached::new(FlakyOnce {
            failed: AtomicBool::new(false),
            calls: AtomicU64::new(0),
        });
        let c = Configuration(vec![0, 0]);
        assert!(cache.evaluate(&space, &c, "t").is_err());
        assert!(cache.evaluate(&space, &c, "t").is_ok());
        assert_eq!(cache.inner().calls.load(Ordering::SeqCst), 2);
        assert_eq!(cache.unique(), 1);
    }

    #[test]
    fn concurrent_requests_call_inner_once_per_key() {
        use rayon::prelude::*;
        let space = tiny_space();
        let cache = Cached::new(TinyEvaluator::default());
        (0..600).into_par_iter().for_each(|i| {
            let c = Configuration(vec![i % 3, (i / 3) % 2]);
            cache.evaluate(&space, &c, "t").unwrap();
        });
        assert_eq!(cache.inner().calls(), 6);
        assert_eq!(cache.unique(), 6);
        assert_eq!(cache.total(), 600);
    }

    #[test]
    fn spec_parsing() {
        for s in ["synthetic", "synthetic:synth-fluid", "sepmono", "table:x.csv", "exec:python3 w.py --x"] {
            assert_eq!(s.parse::<EvaluatorSpec>().unwrap().to_string(), s);
        }
        assert!("synthetic:nope".parse::<EvaluatorSpec>().is_err());
        assert!("table:".parse::<EvaluatorSpec>().is_err());
        assert!("magic".parse::<EvaluatorSpec>().is_err());
    }

    proptest! {
        #[test]
        fn unique_count_is_distinct_keys(reqs in prop::collection::vec((0usize..3, 0usize..2), 0..40)) {
            let space = tiny_space();
            let cache = Cached::new(TinyEvaluator::default());
            for &(a, b) in &reqs {
                cache.evaluate(&space, &Configuration(vec![a, b]), "t").unwrap();
            }
            let distinct: HashSet<_> = reqs.iter().collect();
            prop_assert_eq!(cache.unique() as usize, distinct.len());
            prop_assert_eq!(cache.inner().calls() as usize, distinct.len());
            prop_assert_eq!(cache.total() as usize, reqs.len());
        }
    }
}
