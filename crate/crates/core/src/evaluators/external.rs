//! Subprocess backend speaking line-delimited JSON.
//!
//! One persistent worker per evaluator. Each request is a single line
//! `{"id":N,"benchmark":"..","config":{..}}`; the worker answers with
//! `{"id":N,"metrics":{..}}` or `{"id":N,"error":".."}`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::{EvalError, Evaluator};
use crate::design_space::{Configuration, DesignSpace};
use crate::objective::MetricVector;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    dead: bool,
}

impl Worker {
    /// Kills the worker's whole process group, so programs started by the
    /// shell go down with it.
    fn kill(&mut self) {
        self.dead = true;
        #[cfg(unix)]
        if let Ok(pid) = i32::try_from(self.child.id()) {
            // SAFETY: plain syscall on a group this evaluator created
            unsafe {
                libc::kill(-pid, libc::SIGKILL);
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalEvaluator {
    worker: Mutex<Worker>,
    timeout: Duration,
}

impl ExternalEvaluator {
    /// Starts `command` through `sh -c`.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, EvalError> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(command);
        Self::from_command(cmd, timeout)
    }

    pub fn from_command(mut cmd: Command, timeout: Duration) -> Result<Self, EvalError> {
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
        }
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvalError::Io(format!("failed to start worker: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            worker: Mutex::new(Worker {
                child,
                stdin,
                lines: rx,
                next_id: 1,
                dead: false,
            }),
            timeout,
        })
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        let w = self.worker.get_mut().unwrap_or_else(|e| e.into_inner());
        if !w.dead {
            w.kill();
        }
    }
}

/// Parses one response line for request `id`.
pub fn parse_response(line: &str, id: u64) -> Result<MetricVector, EvalError> {
    let value: Value = serde_json::from_str(line)
        .map_err(|e| EvalError::Protocol(format!("malformed response `{line}`: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| EvalError::Protocol(format!("response is not an object: `{line}`")))?;
    let got = obj
        .get("id")
        .and_then(Value::as_u64)
        .ok_or_else(|| EvalError::Protocol("response lacks an integer id".into()))?;
    if got != id {
        return Err(EvalError::Protocol(format!(
            "response id {got} does not match request id {id}"
        )));
    }
    if let Some(err) = obj.get("error") {
        let msg = err.as_str().map(str::to_owned).unwrap_or_else(|| err.to_string());
        return Err(EvalError::Evaluation(msg));
    }
    let metrics = obj
        .get("metrics")
        .and_then(Value::as_object)
        .ok_or_else(|| EvalError::Protocol("response has neither metrics nor error".into()))?;
    let mut out = MetricVector::default();
    for (k, v) in metrics {
        let v = v
            .as_f64()
            .ok_or_else(|| EvalError::Protocol(format!("metric `{k}` is not a number")))?;
        out.0.insert(k.clone(), v);
    }
    out.check().map_err(|e| EvalError::Protocol(e.to_string()))?;
    Ok(out)
}

pub fn request_line(space: &DesignSpace, config: &Configuration, benchmark: &str, id: u64) -> String {
    json!({
        "id": id,
        "benchmark": benchmark,
        "config": Value::Object(space.config_json(config)),
    })
    .to_string()
}

impl Evaluator for ExternalEvaluator {
    fn evaluate(
        &self,
        space: &DesignSpace,
        config: &Configuration,
        benchmark: &str,
    ) -> Result<MetricVector, EvalError> {
        let mut w = self.worker.lock().unwrap_or_else(|e| e.into_inner());
        if w.dead {
            return Err(EvalError::Terminated);
        }
        let id = w.next_id;
        w.next_id += 1;
        let mut line = request_line(space, config, benchmark, id);
        line.push('\n');
        if w
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| w.stdin.flush())
            .is_err()
        {
            w.kill();
            return Err(EvalError::Terminated);
        }
        match w.lines.recv_timeout(self.timeout) {
            Ok(Ok(resp)) => parse_response(&resp, id),
            Ok(Err(e)) => {
                w.kill();
                Err(EvalError::Io(e.to_string()))
            }
            Err(RecvTimeoutError::Disconnected) => {
                w.kill();
                Err(EvalError::Terminated)
            }
            Err(RecvTimeoutError::Timeout) => {
                w.kill();
                Err(EvalError::Timeout(self.timeout))
            }
        }
    }

    fn is_reentrant(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::tiny_space;

    const SECOND: Duration = Duration::from_secs(5);

    #[test]
    fn request_format() {
        let space = tiny_space();
        assert_eq!(
            request_line(&space, &Configuration(vec![0, 0]), "t", 1),
            r#"{"id":1,"benchmark":"t","config":{"A":1,"B":100}}"#
        );
    }

    #[test]
    fn response_parsing() {
        let ok = parse_response(r#"{"id":1,"metrics":{"power":0.7,"time":26.0}}"#, 1).unwrap();
        assert_eq!(ok, MetricVector::new([("power", 0.7), ("time", 26.0)]));
        assert_eq!(
            parse_response(r#"{"id":1,"error":"sim crashed"}"#, 1),
            Err(EvalError::Evaluation("sim crashed".into()))
        );
        assert!(matches!(
            parse_response(r#"{"id":2,"metrics":{"power":1}}"#, 1),
            Err(EvalError::Protocol(_))
        ));
        assert!(matches!(parse_response("not json", 1), Err(EvalError::Protocol(_))));
        assert!(matches!(parse_response(r#"{"id":1}"#, 1), Err(EvalError::Protocol(_))));
    }

    #[test]
    fn echo_worker_round_trip() {
        let space = tiny_space();
        let ev = ExternalEvaluator::spawn(
            r#"while read line; do echo '{"id":1,"metrics":{"power":0.7,"time":26.0}}'; done"#,
            SECOND,
        )
        .unwrap();
        let m = ev.evaluate(&space, &Configuration(vec![0, 0]), "t").unwrap();
        assert_eq!(m.get("time"), Some(26.0));
        // second request carries id 2, worker keeps answering 1
        assert!(matches!(
            ev.evaluate(&space, &Configuration(vec![0, 0]), "t"),
            Err(EvalError::Protocol(_))
        ));
    }

    #[test]
    fn worker_exit_is_terminated() {
        let space = tiny_space();
        let ev = ExternalEvaluator::spawn("read line; exit 0", SECOND).unwrap();
        assert_eq!(
            ev.evaluate(&space, &Configuration(vec![0, 0]), "t"),
            Err(EvalError::Terminated)
        );
        assert_eq!(
            ev.evaluate(&space, &Configuration(vec![0, 0]), "t"),
            Err(EvalError::Terminated)
        );
    }

    #[test]
    fn silent_worker_times_out() {
        let space = tiny_space();
        let ev = ExternalEvaluator::spawn("sleep 30", Duration::from_millis(200)).unwrap();
        assert!(matches!(
            ev.evaluate(&space, &Configuration(vec![0, 0]), "t"),
            Err(EvalError::Timeout(_))
        ));
    }
}
