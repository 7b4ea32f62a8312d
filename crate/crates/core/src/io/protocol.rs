//! External evaluators: one child process per evaluation, one JSON request
//! line on its stdin, one JSON response line on its stdout.
//!
//! Request: `{"id": 7, "params": {"lr": 0.001, "hidden": [20, 10]}}`
//! Response: `{"id": 7, "objective": 0.93}` or `{"id": 7, "error": "diverged"}`

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::engine::Objective;
use crate::error::EvalError;
use crate::hpo::{Configuration, HpoSpace, ParamValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub params: Configuration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Checks a response line against the request id.
pub fn parse_response(line: &str, expected_id: u64) -> Result<f64, EvalError> {
    let resp: Response =
        serde_json::from_str(line.trim()).map_err(|e| EvalError::Protocol(format!("malformed response: {e}")))?;
    if resp.id != expected_id {
        return Err(EvalError::Protocol(format!("response id {} does not match request id {expected_id}", resp.id)));
    }
    if let Some(err) = resp.error {
        return Err(EvalError::Reported(err));
    }
    resp.objective.ok_or_else(|| EvalError::Protocol("response has no objective".into()))
}

/// Parameter map sent for a box point: decoded values when a space is
/// given, otherwise `x0`, `x1`, ...
pub fn params_for(space: Option<&HpoSpace>, x: &[f64]) -> Result<Configuration, EvalError> {
    match space {
        Some(s) => s.decode(x).map_err(|e| EvalError::Protocol(format!("cannot decode point: {e}"))),
        None => Ok(x.iter().enumerate().map(|(i, &v)| (format!("x{i}"), ParamValue::Real(v))).collect()),
    }
}

#[derive(Debug)]
pub struct ExternalEvaluator {
    pub command: Vec<String>,
    pub timeout: Duration,
    pub space: Option<HpoSpace>,
    next_id: AtomicU64,
}

impl ExternalEvaluator {
    pub fn new(command: Vec<String>, timeout: Duration, space: Option<HpoSpace>) -> Self {
        Self { command, timeout, space, next_id: AtomicU64::new(1) }
    }

    /// Runs the command once for `params`.
    pub fn evaluate_params(&self, params: Configuration) -> Result<f64, EvalError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        evaluate_external(&self.command, &Request { id, params }, self.timeout)
    }
}

impl Objective for ExternalEvaluator {
    fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.evaluate_params(params_for(self.space.as_ref(), x)?)
    }
}

fn kill(child: &mut Child) {
    let _ = child.kill();
    let _ = child.wait();
}

/// Sends one request to a fresh child process and waits for its answer.
pub fn evaluate_external(command: &[String], request: &Request, timeout: Duration) -> Result<f64, EvalError> {
    let (program, args) = command.split_first().ok_or_else(|| EvalError::Process("empty command".into()))?;
    let deadline = Instant::now() + timeout;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| EvalError::Process(format!("cannot start {program}: {e}")))?;

    let mut line = serde_json::to_string(request).map_err(|e| EvalError::Protocol(e.to_string()))?;
    line.push('\n');
    let mut stdin = child.stdin.take().expect("stdin is piped");
    if let Err(e) = stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()) {
        kill(&mut child);
        return Err(EvalError::Process(format!("cannot write request: {e}")));
    }
    drop(stdin);

    let stdout = child.stdout.take().expect("stdout is piped");
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut reader = BufReader::new(stdout);
        let mut buf = String::new();
        let _ = tx.send(reader.read_line(&mut buf).map(|_| buf));
        // Drain anything else so the child never blocks on a full pipe.
        let _ = std::io::copy(&mut reader, &mut std::io::sink());
    });

    let response = match rx.recv_timeout(deadline.saturating_duration_since(Instant::now())) {
        Ok(Ok(buf)) => buf,
        Ok(Err(e)) => {
            kill(&mut child);
            return Err(EvalError::Process(format!("cannot read response: {e}")));
        }
        Err(_) => {
            kill(&mut child);
            return Err(EvalError::Timeout(timeout));
        }
    };

    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if Instant::now() >= deadline => {
                kill(&mut child);
                return Err(EvalError::Timeout(timeout));
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(2)),
            Err(e) => return Err(EvalError::Process(e.to_string())),
        }
    };
    if !status.success() {
        return Err(EvalError::Process(format!("evaluator exited with {status}")));
    }
    if response.trim().is_empty() {
        return Err(EvalError::Protocol("empty response".into()));
    }
    parse_response(&response, request.id)
}
