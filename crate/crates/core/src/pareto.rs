//! Dominance filtering and weighted trade-off selection.

use std::cmp::Ordering;

use crate::design_space::Configuration;
use crate::explorer::LogRecord;
use crate::objective::{MetricVector, Normalization, ObjectiveError, WeightVector};

/// `a` dominates `b` when it is no worse in every metric and strictly better
/// in at least one (all metrics minimized).
pub fn dominates(a: &MetricVector, b: &MetricVector) -> Result<bool, ObjectiveError> {
    if !a.same_keys(b) {
        return Err(ObjectiveError::KeyMismatch);
    }
    let mut strict = false;
    for (x, y) in a.values().zip(b.values()) {
        if x > y {
            return Ok(false);
        }
        if x < y {
            strict = true;
        }
    }
    Ok(strict)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontMember {
    pub config: Configuration,
    pub raw: MetricVector,
    pub normalized: MetricVector,
    pub objective: f64,
    /// Sequence number of the originating log record.
    pub seq: u64,
}

/// Non-dominated subset, ascending by the first metric.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParetoFront {
    pub members: Vec<FrontMember>,
}

fn lex_cmp(a: &MetricVector, b: &MetricVector) -> Ordering {
    for (x, y) in a.values().zip(b.values()) {
        match x.total_cmp(&y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

fn weakly_dominates(a: &MetricVector, b: &MetricVector) -> bool {
    a.values().zip(b.values()).all(|(x, y)| x <= y)
}

impl ParetoFront {
    /// Front of `records` on raw metrics. Identical metric vectors collapse
    /// to the earliest record.
    ///
    /// Records are visited in lexicographic metric order (then log order).
    /// A record can only be dominated by one that sorts before it, and every
    /// record that sorts before it is either on the front or dominated by a
    /// front member, so checking against the current front suffices.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a LogRecord>) -> Self {
        let mut sorted: Vec<&LogRecord> = records.into_iter().collect();
        sorted.sort_by(|a, b| lex_cmp(&a.raw, &b.raw).then(a.seq.cmp(&b.seq)));
        let mut front: Vec<&LogRecord> = Vec::new();
        for r in sorted {
            if front.iter().any(|f| weakly_dominates(&f.raw, &r.raw)) {
                continue;
            }
            front.push(r);
        }
        ParetoFront {
            members: front
                .into_iter()
                .map(|r| FrontMember {
                    config: r.config.clone(),
                    raw: r.raw.clone(),
                    normalized: r.normalized.clone(),
                    objective: r.objective,
                    seq: r.seq,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains_config(&self, config: &Configuration) -> bool {
        self.members.iter().any(|m| &m.config == config)
    }
}

/// Front of every record of `benchmark`.
pub fn pareto_front<'a>(
    records: impl IntoIterator<Item = &'a LogRecord>,
    benchmark: &str,
) -> ParetoFront {
    ParetoFront::from_records(records.into_iter().filter(|r| r.benchmark == benchmark))
}

/// Index of the member minimizing the weighted objective under `norm`;
/// ties go to the smaller first metric.
pub fn select_tradeoff(
    front: &ParetoFront,
    norm: &Normalization,
    weights: &WeightVector,
) -> Result<usize, ObjectiveError> {
    if front.is_empty() {
        return Err(ObjectiveError::Parse("empty Pareto front".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, m) in front.members.iter().enumerate() {
        let f = norm.objective(&m.raw, weights)?;
        let better = match best {
            None => true,
            Some((j, fb)) => {
                f < fb || (f == fb && lex_cmp(&m.raw, &front.members[j].raw) == Ordering::Less)
            }
        };
        if better {
            best = Some((i, f));
        }
    }
    Ok(best.expect("non-empty").0)
}
