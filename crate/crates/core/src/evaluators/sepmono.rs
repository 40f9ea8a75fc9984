use super::{EvalError, Evaluator};
use crate::design_space::{Configuration, DesignSpace};
use crate::objective::MetricVector;

/// Separable, strictly monotone test backend.
///
/// With `idx_j` the chosen setting index of parameter `j`:
/// `power = sum idx_j / (j + 1)` and `time = sum (L_j - 1 - idx_j) / (j + 1)`.
/// Any weighted sum of the two is separable and linear in each index, so the
/// methodology must land on the exhaustive optimum.
#[derive(Debug, Clone, Copy, Default)]
pub struct SepMonoEvaluator;

impl Evaluator for SepMonoEvaluator {
    fn evaluate(
        &self,
        space: &DesignSpace,
        config: &Configuration,
        _benchmark: &str,
    ) -> Result<MetricVector, EvalError> {
        let mut power = 0.0;
        let mut time = 0.0;
        for (j, (&idx, p)) in config.indices().iter().zip(space.parameters()).enumerate() {
            let scale = (j + 1) as f64;
            power += idx as f64 / scale;
            time += (p.len() - 1 - idx) as f64 / scale;
        }
        Ok(MetricVector::new([("power", power), ("time", time)]))
    }
}
