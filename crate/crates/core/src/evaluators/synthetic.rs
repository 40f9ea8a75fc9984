//! Deterministic analytic multicore cost model.
//!
//! Amdahl speedup over `cores`, a cache-miss CPI adder driven by working-set
//! coverage of each cache level, an ILP factor from issue width, reorder
//! buffer and branch predictor, and a cubic frequency power term. Metrics
//! are `power` (W) and `time` (ms).

use std::collections::BTreeMap;

use super::{EvalError, Evaluator};
use crate::design_space::{Configuration, DesignSpace};
use crate::objective::MetricVector;

/// Workload description for the analytic model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticProfile {
    /// Parallel fraction in (0, 1].
    pub parallel: f64,
    /// Working set, kB.
    pub working_set_kb: f64,
    pub instructions: f64,
    pub base_cpi: f64,
}

pub const BUILTIN_PROFILES: [(&str, SyntheticProfile); 3] = [
    (
        "synth-blk",
        SyntheticProfile {
            parallel: 0.95,
            working_set_kb: 64.0,
            instructions: 5e9,
            base_cpi: 1.2,
        },
    ),
    (
        "synth-fluid",
        SyntheticProfile {
            parallel: 0.90,
            working_set_kb: 512.0,
            instructions: 2e9,
            base_cpi: 1.4,
        },
    ),
    (
        "synth-ocean",
        SyntheticProfile {
            parallel: 0.80,
            working_set_kb: 4096.0,
            instructions: 4e9,
            base_cpi: 1.6,
        },
    ),
];

// miss penalties (cycles) for L1, L2, L3 misses
const L1_PENALTY: f64 = 4.0;
const L2_PENALTY: f64 = 12.0;
const L3_PENALTY: f64 = 80.0;
const MEMORY_INTENSITY: f64 = 0.2;

impl SyntheticProfile {
    pub fn builtin(name: &str) -> Option<Self> {
        BUILTIN_PROFILES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, p)| *p)
    }

    pub fn is_valid(&self) -> bool {
        self.parallel > 0.0
            && self.parallel <= 1.0
            && self.working_set_kb > 0.0
            && self.instructions > 0.0
            && self.base_cpi > 0.0
    }
}

/// Machine parameters pulled out of a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Machine {
    pub cores: f64,
    pub freq_mhz: f64,
    pub l1i_kb: f64,
    pub l1d_kb: f64,
    pub l2_kb: f64,
    pub l3_kb: f64,
    pub width: Option<f64>,
    pub rob: Option<f64>,
    pub bpred_x2: bool,
}

impl Machine {
    pub fn from_config(space: &DesignSpace, config: &Configuration) -> Result<Self, EvalError> {
        let num = |name: &str| -> Result<Option<f64>, EvalError> {
            let Ok(i) = space.index_of(name) else {
                return Ok(None);
            };
            let v = space.value(config, i);
            v.as_f64().map(Some).ok_or_else(|| EvalError::NonNumeric {
                parameter: name.to_owned(),
                value: v.to_string(),
            })
        };
        let req = |name: &str| num(name)?.ok_or_else(|| EvalError::MissingParameter(name.into()));
        let bpred_x2 = match space.index_of("bpred") {
            Ok(i) => space
                .value(config, i)
                .to_string()
                .to_ascii_lowercase()
                .ends_with("x2"),
            Err(_) => false,
        };
        Ok(Self {
            cores: req("cores")?,
            freq_mhz: req("freq")?,
            l1i_kb: req("l1i")?,
            l1d_kb: req("l1d")?,
            l2_kb: req("l2")?,
            l3_kb: req("l3")?,
            width: num("width")?,
            rob: num("rob")?,
            bpred_x2,
        })
    }

    fn ilp(&self) -> f64 {
        let mut ilp = 1.0;
        if let Some(w) = self.width {
            ilp += 0.15 * (w / 2.0).log2();
        }
        if let Some(r) = self.rob {
            ilp += 0.10 * (r / 32.0).log2();
        }
        if self.bpred_x2 {
            ilp += 0.05;
        }
        ilp
    }
}

/// Power (W) and execution time (ms) of `profile` on `m`.
pub fn model(m: &Machine, profile: &SyntheticProfile) -> (f64, f64) {
    let ws = profile.working_set_kb;
    let miss_l1i = (ws / (8.0 * m.l1i_kb)).min(1.0);
    let miss_l1d = (ws / (4.0 * m.l1d_kb)).min(1.0);
    let miss_l2 = (ws / (2.0 * m.l2_kb)).min(1.0);
    let miss_l3 = (ws / (8.0 * m.l3_kb)).min(1.0);
    let ilp = m.ilp();
    let stall = L1_PENALTY * (miss_l1d + 0.5 * miss_l1i)
        + L2_PENALTY * miss_l1d * miss_l2
        + L3_PENALTY * miss_l1d * miss_l2 * miss_l3;
    let cpi = profile.base_cpi / ilp + MEMORY_INTENSITY * stall;
    let speedup = 1.0 / ((1.0 - profile.parallel) + profile.parallel / m.cores);
    let time_ms = profile.instructions * cpi / (m.freq_mhz * 1000.0 * speedup);
    let power_w = m.cores * (0.3 + 1.2 * (m.freq_mhz / 3200.0).powi(3) * ilp)
        + 1e-4 * m.cores * (m.l1i_kb + m.l1d_kb + m.l2_kb)
        + 2e-5 * m.l3_kb;
    (power_w, time_ms)
}

/// Maps benchmarks to workload profiles.
#[derive(Debug, Clone)]
pub struct SyntheticEvaluator {
    profiles: BTreeMap<String, SyntheticProfile>,
}

impl SyntheticEvaluator {
    /// Benchmark names are the built-in profile names.
    pub fn by_benchmark_name() -> Self {
        Self {
            profiles: BUILTIN_PROFILES
                .iter()
                .map(|(n, p)| ((*n).to_owned(), *p))
                .collect(),
        }
    }

    /// One profile for every listed benchmark.
    pub fn uniform(profile: SyntheticProfile, benchmarks: &[String]) -> Self {
        Self {
            profiles: benchmarks.iter().map(|b| (b.clone(), profile)).collect(),
        }
    }

    pub fn with_profile(mut self, benchmark: impl Into<String>, profile: SyntheticProfile) -> Self {
        self.profiles.insert(benchmark.into(), profile);
        self
    }
}

impl Evaluator for SyntheticEvaluator {
    fn evaluate(
        &self,
        space: &DesignSpace,
        config: &Configuration,
        benchmark: &str,
    ) -> Result<MetricVector, EvalError> {
        let profile = self
            .profiles
            .get(benchmark)
            .ok_or_else(|| EvalError::UnknownBenchmark(benchmark.to_owned()))?;
        let machine = Machine::from_config(space, config)?;
        let (power, time) = model(&machine, profile);
        Ok(MetricVector::new([("power", power), ("time", time)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::{Parameter, Setting};
    use proptest::prelude::*;

    fn ints(v: &[i64]) -> Vec<Setting> {
        v.iter().copied().map(Setting::Int).collect()
    }

    fn small_space() -> DesignSpace {
        DesignSpace::new(
            vec![
                Parameter::new("cores", ints(&[2, 4, 8])),
                Parameter::new("freq", ints(&[1700, 2200, 2800, 3200])),
                Parameter::new("l1i", ints(&[8, 16, 32, 64, 128])),
                Parameter::new("l1d", ints(&[8, 16, 32, 64, 128])),
                Parameter::new("l2", ints(&[256, 512, 1024])),
                Parameter::new("l3", ints(&[2048, 4096, 8192])),
            ],
            vec!["synth-blk".into(), "synth-fluid".into(), "synth-ocean".into()],
        )
        .unwrap()
    }

    fn cfg(space: &DesignSpace, v: &[(&str, i64)]) -> Configuration {
        space
            .config_from_values(v.iter().map(|&(n, x)| (n, Setting::Int(x))))
            .unwrap()
    }

    #[test]
    fn fluid_reference_point() {
        let space = small_space();
        let c = cfg(
            &space,
            &[("cores", 4), ("freq", 2800), ("l1i", 32), ("l1d", 32), ("l2", 512), ("l3", 4096)],
        );
        let m = SyntheticEvaluator::by_benchmark_name()
            .evaluate(&space, &c, "synth-fluid")
            .unwrap();
        let (p, t) = (m.get("power").unwrap(), m.get("time").unwrap());
        assert!((p - 4.7279).abs() / 4.7279 < 1e-3, "power {p}");
        assert!((t - 911.2).abs() / 911.2 < 1e-3, "time {t}");
    }

    #[test]
    fn doubling_cores() {
        let space = small_space();
        let ev = SyntheticEvaluator::by_benchmark_name();
        let base = [("freq", 2200), ("l1i", 16), ("l1d", 16), ("l2", 512), ("l3", 4096)];
        for bench in ["synth-blk", "synth-fluid", "synth-ocean"] {
            let mut prev: Option<MetricVector> = None;
            for c in [2, 4, 8] {
                let mut v = base.to_vec();
                v.push(("cores", c));
                let m = ev.evaluate(&space, &cfg(&space, &v), bench).unwrap();
                if let Some(p) = prev {
                    assert!(m.get("time") < p.get("time"));
                    assert!(m.get("power") > p.get("power"));
                }
                prev = Some(m);
            }
        }
    }

    #[test]
    fn saturated_l1d_keeps_time_constant() {
        // synth-ocean: W/4 = 1024 kB, so every L1D in the table saturates
        let space = small_space();
        let ev = SyntheticEvaluator::by_benchmark_name();
        let rest = [("cores", 4), ("freq", 2200), ("l1i", 16), ("l2", 512), ("l3", 4096)];
        let at = |l1d| {
            let mut v = rest.to_vec();
            v.push(("l1d", l1d));
            ev.evaluate(&space, &cfg(&space, &v), "synth-ocean").unwrap()
        };
        let (a, b) = (at(8), at(128));
        assert_eq!(a.get("time"), b.get("time"));
        assert!(b.get("power") > a.get("power"));
    }

    #[test]
    fn missing_parameter_and_unknown_benchmark() {
        let space = DesignSpace::new(
            vec![Parameter::new("cores", ints(&[2, 4]))],
            vec!["synth-blk".into()],
        )
        .unwrap();
        let ev = SyntheticEvaluator::by_benchmark_name();
        assert_eq!(
            ev.evaluate(&space, &space.first_config(), "synth-blk"),
            Err(EvalError::MissingParameter("freq".into()))
        );
        assert!(matches!(
            ev.evaluate(&small_space(), &small_space().first_config(), "nope"),
            Err(EvalError::UnknownBenchmark(_))
        ));
    }

    #[test]
    fn large_space_terms() {
        let mut m = Machine {
            cores: 2.0,
            freq_mhz: 1700.0,
            l1i_kb: 8.0,
            l1d_kb: 8.0,
            l2_kb: 256.0,
            l3_kb: 2048.0,
            width: Some(2.0),
            rob: Some(32.0),
            bpred_x2: false,
        };
        assert_eq!(m.ilp(), 1.0);
        m.width = Some(8.0);
        m.rob = Some(128.0);
        m.bpred_x2 = true;
        assert!((m.ilp() - (1.0 + 0.3 + 0.2 + 0.05)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn monotone_in_cores_and_freq(
            prof in 0usize..3,
            l1i in 0usize..5, l1d in 0usize..5, l2 in 0usize..3, l3 in 0usize..3,
            ci in 0usize..2, fi in 0usize..3,
        ) {
            let space = small_space();
            let ev = SyntheticEvaluator::by_benchmark_name();
            let bench = BUILTIN_PROFILES[prof].0;
            let base = Configuration(vec![ci, fi, l1i, l1d, l2, l3]);
            let m0 = ev.evaluate(&space, &base, bench).unwrap();
            let mc = ev.evaluate(&space, &base.with(0, ci + 1), bench).unwrap();
            let mf = ev.evaluate(&space, &base.with(1, fi + 1), bench).unwrap();
            prop_assert!(mc.get("time") <= m0.get("time"));
            prop_assert!(mc.get("power") > m0.get("power"));
            prop_assert!(mf.get("time") <= m0.get("time"));
            prop_assert!(mf.get("power") > m0.get("power"));
            // purity
            let again = ev.evaluate(&space, &base, bench).unwrap();
            prop_assert_eq!(
                m0.values().map(f64::to_bits).collect::<Vec<_>>(),
                again.values().map(f64::to_bits).collect::<Vec<_>>()
            );
        }
    }
}
