#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn dse_bin() -> &'static str {
    env!("CARGO_BIN_EXE_dse")
}

pub fn mock_worker() -> &'static str {
    env!("CARGO_BIN_EXE_dse-mock-worker")
}

pub fn spaces() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../spaces")
}

pub fn space(name: &str) -> String {
    spaces().join(name).display().to_string()
}

pub fn dse(args: &[&str]) -> Output {
    Command::new(dse_bin())
        .args(args)
        .output()
        .expect("dse binary runs")
}

pub fn dse_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    Command::new(dse_bin())
        .args(args)
        .envs(env.iter().copied())
        .output()
        .expect("dse binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// `dse run` on the TINY space and table with the given extra flags.
pub fn tiny_run(out: &Path, extra: &[&str]) -> Output {
    let table = format!("table:{}", space("tiny_table.csv"));
    let tiny = space("tiny.json");
    let out = out.display().to_string();
    let mut args = vec![
        "run", "--space", &tiny, "--threshold", "3", "--evaluator", &table, "--out", &out,
    ];
    args.extend_from_slice(extra);
    if !extra.iter().any(|a| *a == "--profile" || *a == "--weights") {
        args.extend_from_slice(&["--profile", "highperf"]);
    }
    dse(&args)
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
