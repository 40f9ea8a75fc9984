//! Inputs shared by the criterion benches.

use dse_core::explorer::{LogRecord, Phase};
use dse_core::{Configuration, DesignSpace, MetricVector, Parameter, Setting};

/// The nine-parameter hardware space: 86400 configurations.
pub fn large_space(benchmarks: &[&str]) -> DesignSpace {
    let ints = |v: &[i64]| v.iter().copied().map(Setting::Int).collect::<Vec<_>>();
    DesignSpace::new(
        vec![
            Parameter::new("cores", ints(&[2, 4, 8])),
            Parameter::new("freq", ints(&[1700, 2200, 2800, 3200])),
            Parameter::new("l1i", ints(&[8, 16, 32, 64, 128])),
            Parameter::new("l1d", ints(&[8, 16, 32, 64, 128])),
            Parameter::new("l2", ints(&[256, 512, 1024])),
            Parameter::new("l3", ints(&[2048, 4096, 8192])),
            Parameter::new("width", ints(&[2, 4, 8, 16])),
            Parameter::new("rob", ints(&[32, 64, 128, 256])),
            Parameter::new(
                "bpred",
                vec![Setting::Text("BPredX".into()), Setting::Text("BPredX2".into())],
            ),
        ],
        benchmarks.iter().map(|b| (*b).to_owned()).collect(),
    )
    .expect("static space is valid")
}

/// `n` log records on a noisy trade-off curve, deterministic.
pub fn tradeoff_log(n: usize) -> Vec<LogRecord> {
    let mut x = 0x2545_f491_4f6c_dd1du64;
    (0..n)
        .map(|i| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            let u = (x >> 11) as f64 / (1u64 << 53) as f64;
            let p = 0.5 + 4.0 * (i as f64 / n as f64);
            let t = 100.0 / p + 20.0 * u;
            let raw = MetricVector::new([("power", p), ("time", t)]);
            LogRecord {
                benchmark: "b".into(),
                phase: Phase::Exhaustive,
                seq: i as u64,
                config: Configuration(vec![i]),
                normalized: raw.clone(),
                raw,
                objective: 0.0,
            }
        })
        .collect()
}
