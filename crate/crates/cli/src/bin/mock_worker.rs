//! Line-delimited JSON worker for protocol tests.
//!
//! Answers with `power = 0.5 A + 0.002 B`, `time = 24 / A + 200 / B` for
//! the first `--after` requests, then behaves according to `--mode`.

use std::io::{self, BufRead, Write};
use std::time::Duration;

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Ok,
    Error,
    BadId,
    Hang,
    Garbage,
    Exit,
}

#[derive(Debug, Parser)]
#[command(name = "dse-mock-worker")]
struct Opts {
    #[arg(long, value_enum, default_value = "ok")]
    mode: Mode,
    /// Well-behaved responses before `--mode` takes effect.
    #[arg(long, default_value_t = 0)]
    after: u64,
}

fn number(config: &Value, key: &str) -> Option<f64> {
    config.get(key).and_then(Value::as_f64)
}

fn answer(id: &Value, request: &Value) -> Value {
    let config = &request["config"];
    match (number(config, "A"), number(config, "B")) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => json!({
            "id": id,
            "metrics": {"power": 0.5 * a + 0.002 * b, "time": 24.0 / a + 200.0 / b},
        }),
        _ => json!({"id": id, "error": "config needs positive numeric A and B"}),
    }
}

fn main() -> io::Result<()> {
    let opts = Opts::parse();
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    for (served, line) in stdin.lock().lines().enumerate() {
        let line = line?;
        let request: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                writeln!(out, "{}", json!({"id": null, "error": format!("bad request: {e}")}))?;
                out.flush()?;
                continue;
            }
        };
        let id = request["id"].clone();
        let response = if (served as u64) < opts.after {
            answer(&id, &request)
        } else {
            match opts.mode {
                Mode::Ok => answer(&id, &request),
                Mode::Error => json!({"id": id, "error": "simulated failure"}),
                Mode::BadId => json!({
                    "id": id.as_u64().unwrap_or(0) + 1000,
                    "metrics": {"power": 1.0, "time": 1.0},
                }),
                Mode::Hang => loop {
                    std::thread::sleep(Duration::from_secs(3600));
                },
                Mode::Garbage => {
                    writeln!(out, "this is not json")?;
                    out.flush()?;
                    continue;
                }
                Mode::Exit => return Ok(()),
            }
        };
        writeln!(out, "{response}")?;
        out.flush()?;
    }
    Ok(())
}
