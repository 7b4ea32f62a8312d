//! Line-delimited JSON result and event logs.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{EvalRecord, ObjectiveSense, RecordKind};
use crate::engine::{trace_of, OptimizationResult};
use crate::error::Result;
use crate::hpo::{Configuration, HpoSpace};
use crate::scheduler::{Event, EventKind, TaskKind};

/// One result-log line per evaluation. `value` is in user sense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub seq: u64,
    pub kind: String,
    pub point: Vec<f64>,
    pub params: Option<Configuration>,
    pub value: f64,
    pub t_wall_ms: f64,
    pub weight: Option<f64>,
    pub worker: usize,
    /// Present and true only for failed evaluations carrying a penalty value.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub failed: bool,
}

fn kind_name(kind: RecordKind) -> &'static str {
    match kind {
        RecordKind::InitialDesign => "initial_design",
        RecordKind::Search => "search",
        RecordKind::Temporary => "temporary",
    }
}

impl LogLine {
    pub fn from_record(r: &EvalRecord, sense: ObjectiveSense, space: Option<&HpoSpace>) -> Self {
        Self {
            seq: r.sequence_id,
            kind: kind_name(r.kind).into(),
            point: r.point.clone(),
            params: space.and_then(|s| s.decode(&r.point).ok()),
            value: sense.to_user(r.value),
            t_wall_ms: r.t_wall_ms,
            weight: r.weight_used,
            worker: r.worker,
            failed: r.failed,
        }
    }
}

/// Writes one line per evaluation in sequence order.
pub fn write_result_log<W: Write>(mut out: W, result: &OptimizationResult, space: Option<&HpoSpace>) -> Result<()> {
    let mut records: Vec<&EvalRecord> = result.evaluations.iter().collect();
    records.sort_by_key(|r| r.sequence_id);
    for r in records {
        serde_json::to_writer(&mut out, &LogLine::from_record(r, result.sense, space))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_log<R: BufRead>(input: R) -> Result<Vec<LogLine>> {
    let mut lines = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            lines.push(serde_json::from_str(&line)?);
        }
    }
    Ok(lines)
}

/// Best-so-far values recomputed from a result log.
pub fn replay_trace(lines: &[LogLine], sense: ObjectiveSense) -> Vec<f64> {
    let mut sorted: Vec<&LogLine> = lines.iter().collect();
    sorted.sort_by_key(|l| l.seq);
    let values: Vec<f64> = sorted.iter().map(|l| l.value).collect();
    trace_of(&values, sense)
}

/// Event-log line: the result-log fields plus the task id and event details.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLine {
    pub seq: u64,
    pub kind: String,
    pub point: Option<Vec<f64>>,
    pub params: Option<Configuration>,
    pub value: Option<f64>,
    pub t_wall_ms: f64,
    pub weight: Option<f64>,
    pub worker: Option<usize>,
    pub task: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_kind: Option<TaskKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_evaluations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
}

impl EventLine {
    pub fn from_event(e: &Event, space: Option<&HpoSpace>) -> Self {
        let mut line = EventLine {
            seq: e.seq,
            kind: String::new(),
            point: None,
            params: None,
            value: None,
            t_wall_ms: e.t_wall_ms,
            weight: None,
            worker: None,
            task: 0,
            task_kind: None,
            pending_evaluations: None,
            range: None,
        };
        let (name, task) = match &e.kind {
            EventKind::Enqueued { task, task_kind } => {
                line.task_kind = Some(*task_kind);
                ("enqueued", *task)
            }
            EventKind::Dequeued { task, task_kind, worker, pending_evaluations } => {
                line.task_kind = Some(*task_kind);
                line.worker = Some(*worker);
                line.pending_evaluations = Some(*pending_evaluations);
                ("dequeued", *task)
            }
            EventKind::TempCreated { task, point, value, range_min, range_max } => {
                line.point = Some(point.clone());
                line.value = Some(*value);
                line.range = Some((*range_min, *range_max));
                ("temp_created", *task)
            }
            EventKind::TempRemoved { task } => ("temp_removed", *task),
            EventKind::Evaluated { task, point, value, worker, weight, .. } => {
                line.point = Some(point.clone());
                line.value = Some(*value);
                line.worker = Some(*worker);
                line.weight = *weight;
                ("evaluated", *task)
            }
            EventKind::ProposalRejected { task } => ("proposal_rejected", *task),
            EventKind::Requeued { task } => ("requeued", *task),
            EventKind::Dropped { task } => ("dropped", *task),
        };
        line.kind = name.into();
        line.task = task;
        line.params = match (&line.point, space) {
            (Some(p), Some(s)) => s.decode(p).ok(),
            _ => None,
        };
        line
    }
}

pub fn write_event_log<W: Write>(mut out: W, events: &[Event], space: Option<&HpoSpace>) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, &EventLine::from_event(e, space))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
