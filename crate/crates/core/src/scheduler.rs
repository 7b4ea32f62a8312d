//! Asynchronous parallel evaluation.
//!
//! A single coordinator owns all state. Workers receive one task at a time:
//! either evaluate the objective at a point (type 1) or compute a new search
//! point from an immutable snapshot of the nodes (type 2). Type-1 tasks are
//! always dequeued before type-2 tasks; each kind is served first come, first
//! served.
//!
//! When a search point is accepted, a temporary node is placed at it with
//! the surrogate's prediction clipped to the range of real values, so that
//! concurrent proposals keep their distance from in-flight evaluations. The
//! temporary node disappears when the evaluation completes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::design::latin_hypercube;
use crate::domain::{BoxDomain, NodeSet, ObjectiveSense, RecordKind};
use crate::engine::{
    fit_or_none, guarded_eval, stream_names, Archive, Budget, EngineConfig, Objective, OptimizationResult, StopReason,
};
use crate::error::{Error, EvalError, ProposerError, Result};
use crate::proposer::{is_acceptable, propose_step, Proposal, SearchStep};
use crate::rng::RngStream;
use crate::surrogate::RbfModel;

pub type TaskId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Evaluate,
    Propose,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskPayload {
    Evaluate { point: Vec<f64>, record_kind: RecordKind, weight: Option<f64> },
    Propose { ticket: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: TaskId,
    pub payload: TaskPayload,
    pub enqueued_at: u64,
    /// Times this task was handed back after a worker crash.
    pub requeues: u32,
}

impl Task {
    pub fn kind(&self) -> TaskKind {
        match self.payload {
            TaskPayload::Evaluate { .. } => TaskKind::Evaluate,
            TaskPayload::Propose { .. } => TaskKind::Propose,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TempNode {
    pub point: Vec<f64>,
    pub scaled: Vec<f64>,
    pub clipped_value: f64,
    pub linked_task: TaskId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    Enqueued { task: TaskId, task_kind: TaskKind },
    /// `pending_evaluations` counts type-1 tasks still queued after this dequeue.
    Dequeued { task: TaskId, task_kind: TaskKind, worker: usize, pending_evaluations: usize },
    TempCreated { task: TaskId, point: Vec<f64>, value: f64, range_min: f64, range_max: f64 },
    TempRemoved { task: TaskId },
    Evaluated { task: TaskId, record: u64, point: Vec<f64>, value: f64, failed: bool, worker: usize, weight: Option<f64> },
    ProposalRejected { task: TaskId },
    Requeued { task: TaskId },
    Dropped { task: TaskId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub t_wall_ms: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Queue, in-flight tasks, temporary nodes, and the event log of one run.
pub struct SchedulerState {
    archive: Archive,
    pending_evaluations: VecDeque<Task>,
    pending_proposals: VecDeque<Task>,
    in_flight: BTreeMap<TaskId, (Task, usize)>,
    temps: Vec<TempNode>,
    events: Vec<Event>,
    next_task: TaskId,
    next_ticket: u64,
    enqueue_counter: u64,
}

impl SchedulerState {
    pub fn new(domain: BoxDomain, sense: ObjectiveSense, max_consecutive_failures: usize) -> Self {
        Self {
            archive: Archive::new(domain, sense, max_consecutive_failures),
            pending_evaluations: VecDeque::new(),
            pending_proposals: VecDeque::new(),
            in_flight: BTreeMap::new(),
            temps: Vec::new(),
            events: Vec::new(),
            next_task: 0,
            next_ticket: 0,
            enqueue_counter: 0,
        }
    }

    fn log(&mut self, kind: EventKind) {
        let t_wall_ms = self.archive.elapsed().as_secs_f64() * 1e3;
        self.events.push(Event { seq: self.events.len() as u64, t_wall_ms, kind });
    }

    fn push(&mut self, payload: TaskPayload) -> TaskId {
        let id = self.next_task;
        self.next_task += 1;
        let task = Task { id, payload, enqueued_at: self.enqueue_counter, requeues: 0 };
        self.enqueue_counter += 1;
        let task_kind = task.kind();
        match task_kind {
            TaskKind::Evaluate => self.pending_evaluations.push_back(task),
            TaskKind::Propose => self.pending_proposals.push_back(task),
        }
        self.log(EventKind::Enqueued { task: id, task_kind });
        id
    }

    pub fn enqueue_evaluation(&mut self, point: Vec<f64>, record_kind: RecordKind, weight: Option<f64>) -> TaskId {
        self.push(TaskPayload::Evaluate { point, record_kind, weight })
    }

    pub fn enqueue_proposal(&mut self) -> TaskId {
        let ticket = self.next_ticket;
        self.next_ticket += 1;
        self.push(TaskPayload::Propose { ticket })
    }

    pub fn pending(&self) -> usize {
        self.pending_evaluations.len() + self.pending_proposals.len()
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    /// Evaluations finished, running, queued, or implied by outstanding proposals.
    pub fn committed_evaluations(&self) -> usize {
        self.archive.len() + self.pending() + self.in_flight()
    }

    pub fn records(&self) -> usize {
        self.archive.len()
    }

    pub fn temp_nodes(&self) -> &[TempNode] {
        &self.temps
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Real nodes followed by temporary ones.
    pub fn nodes(&self) -> NodeSet {
        let mut nodes = self.archive.nodes();
        for t in &self.temps {
            nodes.push(t.scaled.clone(), t.clipped_value, true);
        }
        nodes
    }

    /// Oldest type-1 task if there is one, else the oldest type-2 task.
    pub fn dequeue(&mut self, worker: usize) -> Result<Task> {
        let task = self
            .pending_evaluations
            .pop_front()
            .or_else(|| self.pending_proposals.pop_front())
            .ok_or_else(|| Error::Contract("dequeue from an empty queue".into()))?;
        let pending_evaluations = self.pending_evaluations.len();
        self.log(EventKind::Dequeued { task: task.id, task_kind: task.kind(), worker, pending_evaluations });
        self.in_flight.insert(task.id, (task.clone(), worker));
        Ok(task)
    }

    fn take_in_flight(&mut self, task: TaskId) -> Result<(Task, usize)> {
        self.in_flight
            .remove(&task)
            .ok_or_else(|| Error::Contract(format!("task {task} is not in flight")))
    }

    fn remove_temp(&mut self, task: TaskId) {
        if let Some(i) = self.temps.iter().position(|t| t.linked_task == task) {
            self.temps.remove(i);
            self.log(EventKind::TempRemoved { task });
        }
    }

    /// Puts a crashed evaluation back at the front of the type-1 queue.
    fn requeue(&mut self, task: TaskId) -> Result<()> {
        let (mut t, _) = self.take_in_flight(task)?;
        t.requeues += 1;
        self.pending_evaluations.push_front(t);
        self.log(EventKind::Requeued { task });
        Ok(())
    }

    /// Records the outcome (user sense) of an in-flight evaluation and drops its temporary node.
    pub fn on_eval_complete(&mut self, task: TaskId, outcome: std::result::Result<f64, EvalError>) -> Result<()> {
        let (t, worker) = self.take_in_flight(task)?;
        let TaskPayload::Evaluate { point, record_kind, weight } = t.payload else {
            return Err(Error::Contract(format!("task {task} is not an evaluation")));
        };
        self.remove_temp(task);
        let ingested = self.archive.ingest(point, outcome, record_kind, weight, worker).map(|_| ());
        let r = self.archive.records.last().expect("ingest always records");
        let (record, failed, point) = (r.sequence_id, r.failed, r.point.clone());
        let value = self.archive.sense.to_user(r.value);
        self.log(EventKind::Evaluated { task, record, point, value, failed, worker, weight });
        ingested
    }

    /// Handles a finished search-point computation. The point is checked
    /// again against the current nodes, which may have changed since the
    /// snapshot was taken. Returns the id of the follow-up task.
    pub fn on_proposal_complete(
        &mut self,
        task: TaskId,
        proposal: &Proposal,
        model_snapshot: Option<&RbfModel>,
    ) -> Result<TaskId> {
        let (t, _) = self.take_in_flight(task)?;
        if t.kind() != TaskKind::Propose {
            return Err(Error::Contract(format!("task {task} is not a proposal")));
        }
        if !is_acceptable(&self.nodes(), &proposal.scaled) {
            self.log(EventKind::ProposalRejected { task });
            return Ok(self.enqueue_proposal());
        }
        let (lo, hi) = self
            .archive
            .nodes()
            .real_value_range()
            .ok_or_else(|| Error::Contract("proposal completed before any real node".into()))?;
        let predicted = model_snapshot.map_or(hi, |m| m.predict(&proposal.scaled));
        let clipped_value = if predicted.is_finite() { predicted.clamp(lo, hi) } else { hi };
        let id = self.enqueue_evaluation(proposal.point.clone(), RecordKind::Search, Some(proposal.weight_used));
        self.temps.push(TempNode {
            point: proposal.point.clone(),
            scaled: proposal.scaled.clone(),
            clipped_value,
            linked_task: id,
        });
        self.log(EventKind::TempCreated {
            task: id,
            point: proposal.point.clone(),
            value: clipped_value,
            range_min: lo,
            range_max: hi,
        });
        Ok(id)
    }

    /// Discards a finished proposal without acting on it.
    fn discard(&mut self, task: TaskId) -> Result<()> {
        self.take_in_flight(task)?;
        self.log(EventKind::Dropped { task });
        Ok(())
    }

    /// Empties the queue, removing temporary nodes of dropped evaluations.
    fn drop_pending(&mut self) {
        let tasks: Vec<Task> = self.pending_evaluations.drain(..).chain(self.pending_proposals.drain(..)).collect();
        for t in tasks {
            self.remove_temp(t.id);
            self.log(EventKind::Dropped { task: t.id });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditReport {
    pub evaluations: usize,
    pub duplicate_points: usize,
    pub surviving_temps: usize,
    pub temps_created: usize,
    pub temps_out_of_range: usize,
    pub priority_violations: usize,
}

impl AuditReport {
    pub fn clean(&self) -> bool {
        self.duplicate_points == 0
            && self.surviving_temps == 0
            && self.temps_out_of_range == 0
            && self.priority_violations == 0
    }
}

/// Replays an event log and checks the scheduler's invariants.
pub fn audit(events: &[Event]) -> AuditReport {
    let mut report = AuditReport::default();
    let mut live = BTreeSet::new();
    let mut points: Vec<&Vec<f64>> = Vec::new();
    for e in events {
        match &e.kind {
            EventKind::Dequeued { task_kind: TaskKind::Propose, pending_evaluations, .. } if *pending_evaluations > 0 => {
                report.priority_violations += 1;
            }
            EventKind::TempCreated { task, value, range_min, range_max, .. } => {
                report.temps_created += 1;
                if !(value >= range_min && value <= range_max) {
                    report.temps_out_of_range += 1;
                }
                live.insert(*task);
            }
            EventKind::TempRemoved { task } => {
                live.remove(task);
            }
            EventKind::Evaluated { point, .. } => {
                report.evaluations += 1;
                if points.iter().any(|p| *p == point) {
                    report.duplicate_points += 1;
                }
                points.push(point);
            }
            _ => {}
        }
    }
    report.surviving_temps = live.len();
    report
}

#[derive(Debug, Clone)]
pub struct ParallelRun {
    pub result: OptimizationResult,
    pub events: Vec<Event>,
}

enum Job {
    Evaluate { task: TaskId, point: Vec<f64> },
    Propose { task: TaskId, nodes: NodeSet, step: SearchStep, stream: RngStream },
}

enum Done {
    Evaluated { task: TaskId, worker: usize, outcome: std::result::Result<f64, EvalError> },
    Proposed { task: TaskId, worker: usize, proposal: std::result::Result<Proposal, ProposerError>, model: Option<RbfModel> },
    ProposerCrashed { task: TaskId, worker: usize },
}

/// Runs the optimizer with `workers` concurrent evaluations.
pub fn run_parallel(
    objective: &dyn Objective,
    domain: &BoxDomain,
    sense: ObjectiveSense,
    budget: &Budget,
    config: &EngineConfig,
    workers: usize,
    seed: u64,
) -> Result<ParallelRun> {
    if workers == 0 {
        return Err(crate::error::ConfigError::NoWorkers.into());
    }
    let n = domain.dim();
    config.validate(n)?;
    budget.validate(config.design_size(n))?;
    let (design_stream, proposer_stream) = stream_names(seed);
    let design = latin_hypercube(domain, config.design_size(n), &design_stream)?;
    let design_len = design.points.len();
    let ga = config.ga_for(n);

    let mut state = SchedulerState::new(domain.clone(), sense, config.max_consecutive_failures);
    for p in design.points {
        state.enqueue_evaluation(p, RecordKind::InitialDesign, None);
    }

    std::thread::scope(|scope| {
        let (done_tx, done_rx) = mpsc::channel::<Done>();
        let mut job_txs = Vec::with_capacity(workers);
        for worker in 0..workers {
            let (tx, rx) = mpsc::channel::<Job>();
            job_txs.push(tx);
            let done_tx = done_tx.clone();
            let ga = &ga;
            scope.spawn(move || {
                for job in rx {
                    let msg = match job {
                        Job::Evaluate { task, point } => {
                            Done::Evaluated { task, worker, outcome: guarded_eval(objective, &point) }
                        }
                        Job::Propose { task, nodes, step, stream } => {
                            match catch_unwind(AssertUnwindSafe(|| {
                                let model = fit_or_none(&nodes, config);
                                let proposal = propose_step(model.as_ref(), &nodes, domain, step, ga, &stream);
                                (proposal, model)
                            })) {
                                Ok((proposal, model)) => Done::Proposed { task, worker, proposal, model },
                                Err(_) => Done::ProposerCrashed { task, worker },
                            }
                        }
                    };
                    if done_tx.send(msg).is_err() {
                        break;
                    }
                }
            });
        }
        drop(done_tx);

        let mut idle: BTreeSet<usize> = (0..workers).collect();
        let mut stopping: Option<StopReason> = None;
        let mut saturated = false;
        let mut failure: Option<Error> = None;

        loop {
            while let Some(&worker) = idle.first() {
                if stopping.is_none() && budget.max_wallclock.is_some_and(|t| state.archive.elapsed() >= t) {
                    stopping = Some(StopReason::TimeExhausted);
                }
                if stopping.is_some() || failure.is_some() {
                    break;
                }
                if state.pending() == 0 {
                    let design_done = state.records() >= design_len && state.archive.successes() > 0;
                    let room = budget.max_evaluations.is_none_or(|m| state.committed_evaluations() < m);
                    if design_done && room && !saturated {
                        state.enqueue_proposal();
                    } else {
                        break;
                    }
                }
                let task = state.dequeue(worker).expect("queue is nonempty");
                let job = match task.payload {
                    TaskPayload::Evaluate { point, .. } => Job::Evaluate { task: task.id, point },
                    TaskPayload::Propose { ticket } => Job::Propose {
                        task: task.id,
                        nodes: state.nodes(),
                        step: config.step_for(ticket),
                        stream: proposer_stream.child(ticket),
                    },
                };
                idle.remove(&worker);
                job_txs[worker].send(job).expect("worker alive");
            }
            if state.in_flight() == 0 {
                break;
            }
            let msg = done_rx.recv().expect("workers alive while tasks are in flight");
            match msg {
                Done::Evaluated { task, worker, outcome } => {
                    idle.insert(worker);
                    let requeues = state.in_flight.get(&task).map_or(0, |(t, _)| t.requeues);
                    if matches!(outcome, Err(EvalError::Crashed(_))) && requeues == 0 && failure.is_none() {
                        let _ = state.requeue(task);
                        continue;
                    }
                    if let Err(e) = state.on_eval_complete(task, outcome) {
                        failure.get_or_insert(e);
                    } else if stopping.is_none() && state.archive.target_reached(budget.target_value) {
                        stopping = Some(StopReason::TargetReached);
                    }
                }
                Done::Proposed { task, worker, proposal, model } => {
                    idle.insert(worker);
                    if stopping.is_some() || failure.is_some() {
                        let _ = state.discard(task);
                        continue;
                    }
                    match proposal {
                        Ok(p) => {
                            if let Err(e) = state.on_proposal_complete(task, &p, model.as_ref()) {
                                failure.get_or_insert(e);
                            }
                        }
                        Err(_) => {
                            saturated = true;
                            let _ = state.discard(task);
                        }
                    }
                }
                Done::ProposerCrashed { task, worker } => {
                    idle.insert(worker);
                    let _ = state.discard(task);
                    if stopping.is_none() && failure.is_none() {
                        state.enqueue_proposal();
                    }
                }
            }
        }
        drop(job_txs);
        state.drop_pending();

        if let Some(e) = failure {
            return Err(e);
        }
        let reason = stopping.unwrap_or_else(|| {
            if budget.max_evaluations.is_some_and(|m| state.records() >= m) {
                StopReason::EvalsExhausted
            } else {
                StopReason::ProposerSaturated
            }
        });
        let events = std::mem::take(&mut state.events);
        let result = state.archive.into_result(reason)?;
        Ok(ParallelRun { result, events })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::optimize;
    use crate::proposer::ProposalOrigin;
    use std::time::Duration;

    fn unit2() -> BoxDomain {
        BoxDomain::uniform(2, 0.0, 1.0).unwrap()
    }

    fn state_with_real(values: &[(f64, f64)]) -> SchedulerState {
        let mut s = SchedulerState::new(unit2(), ObjectiveSense::Minimize, 10);
        for &(x, v) in values {
            let id = s.enqueue_evaluation(vec![x, x], RecordKind::InitialDesign, None);
            s.dequeue(0).unwrap();
            s.on_eval_complete(id, Ok(v)).unwrap();
        }
        s
    }

    fn proposal_at(p: [f64; 2]) -> Proposal {
        Proposal {
            point: p.to_vec(),
            scaled: p.to_vec(),
            weight_used: 0.5,
            accepted: true,
            rejection_reason: None,
            origin: ProposalOrigin::Search,
        }
    }

    /// A constant "model" predicting `v` everywhere.
    fn flat_model(v: f64) -> RbfModel {
        RbfModel {
            kernel: crate::surrogate::Kernel::ThinPlateSpline,
            centers: vec![],
            radial_coeffs: vec![],
            poly_coeffs: vec![0.0, 0.0, v],
            regularization_used: 0.0,
        }
    }

    fn temp_value_for(predicted: f64) -> f64 {
        let mut s = state_with_real(&[(0.0, 0.2), (1.0, 0.9)]);
        let t = s.enqueue_proposal();
        s.dequeue(0).unwrap();
        s.on_proposal_complete(t, &proposal_at([0.5, 0.25]), Some(&flat_model(predicted))).unwrap();
        s.temp_nodes()[0].clipped_value
    }

    #[test]
    fn temp_values_are_clipped() {
        assert_eq!(temp_value_for(1.5), 0.9);
        assert_eq!(temp_value_for(0.5), 0.5);
        assert_eq!(temp_value_for(-3.0), 0.2);
    }

    #[test]
    fn dequeue_priority_and_fifo() {
        let mut s = SchedulerState::new(unit2(), ObjectiveSense::Minimize, 10);
        let p1 = s.enqueue_proposal();
        let e2 = s.enqueue_evaluation(vec![0.1, 0.1], RecordKind::Search, None);
        assert_eq!(s.dequeue(0).unwrap().id, e2);
        assert_eq!(s.dequeue(0).unwrap().id, p1);

        let e1 = s.enqueue_evaluation(vec![0.2, 0.2], RecordKind::Search, None);
        let e2 = s.enqueue_evaluation(vec![0.3, 0.3], RecordKind::Search, None);
        assert_eq!(s.dequeue(0).unwrap().id, e1);
        assert_eq!(s.dequeue(0).unwrap().id, e2);

        let p1 = s.enqueue_proposal();
        let _p2 = s.enqueue_proposal();
        assert_eq!(s.dequeue(0).unwrap().id, p1);
        s.dequeue(0).unwrap();
        assert!(matches!(s.dequeue(0), Err(Error::Contract(_))));
    }

    #[test]
    fn completion_swaps_temp_for_real() {
        let mut s = state_with_real(&[(0.0, 0.2), (1.0, 0.9)]);
        let t = s.enqueue_proposal();
        s.dequeue(0).unwrap();
        let eval = s.on_proposal_complete(t, &proposal_at([0.5, 0.25]), Some(&flat_model(0.4))).unwrap();
        assert_eq!(s.nodes().len(), 3);
        assert_eq!(s.temp_nodes().len(), 1);
        s.dequeue(1).unwrap();
        s.on_eval_complete(eval, Ok(5.0)).unwrap();
        let nodes = s.nodes();
        assert_eq!(nodes.len(), 3);
        assert_eq!(nodes.temporary_count(), 0);
        // The range may widen through real values.
        assert_eq!(nodes.real_value_range(), Some((0.2, 5.0)));
    }

    #[test]
    fn unknown_task_is_contract_error() {
        let mut s = state_with_real(&[(0.0, 0.2)]);
        assert!(matches!(s.on_eval_complete(99, Ok(1.0)), Err(Error::Contract(_))));
    }

    #[test]
    fn stale_proposal_is_replaced() {
        let mut s = state_with_real(&[(0.0, 0.2), (1.0, 0.9)]);
        let a = s.enqueue_proposal();
        let b = s.enqueue_proposal();
        s.dequeue(0).unwrap();
        s.dequeue(1).unwrap();
        s.on_proposal_complete(a, &proposal_at([0.5, 0.25]), None).unwrap();
        // Same point from a concurrent snapshot: now too close to the temp node.
        let follow_up = s.on_proposal_complete(b, &proposal_at([0.5, 0.25]), None).unwrap();
        assert_eq!(s.temp_nodes().len(), 1);
        assert_eq!(s.dequeue(0).unwrap().kind(), TaskKind::Evaluate);
        let next = s.dequeue(0).unwrap();
        assert_eq!((next.id, next.kind()), (follow_up, TaskKind::Propose));
    }

    fn branin_like(x: &[f64]) -> f64 {
        (x[1] - 0.4).powi(2) + (x[0] - 0.6).powi(2) + 0.1 * (6.0 * x[0]).sin()
    }

    #[test]
    fn single_worker_matches_serial() {
        let d = unit2();
        let cfg = EngineConfig::default();
        let budget = Budget::evaluations(30);
        let serial = optimize(&branin_like, &d, ObjectiveSense::Minimize, &budget, &cfg, 17).unwrap();
        let par = run_parallel(&branin_like, &d, ObjectiveSense::Minimize, &budget, &cfg, 1, 17).unwrap();
        let a: Vec<_> = serial.evaluations.iter().map(|r| r.point.clone()).collect();
        let b: Vec<_> = par.result.evaluations.iter().map(|r| r.point.clone()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_run_is_clean() {
        let d = unit2();
        let slow = |x: &[f64]| {
            std::thread::sleep(Duration::from_micros(300 + (x[0] * 1000.0) as u64));
            branin_like(x)
        };
        for workers in [2, 4, 8] {
            let run = run_parallel(&slow, &d, ObjectiveSense::Minimize, &Budget::evaluations(40), &EngineConfig::default(), workers, 3)
                .unwrap();
            assert_eq!(run.result.evaluations.len(), 40);
            let report = audit(&run.events);
            assert!(report.clean(), "{report:?}");
            assert_eq!(report.evaluations, 40);
            assert!(report.temps_created > 0);
        }
    }

    #[test]
    fn crashed_evaluation_requeued_once() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let calls = AtomicUsize::new(0);
        let flaky = |x: &[f64]| {
            // The first call panics; the retry succeeds.
            if calls.fetch_add(1, Ordering::SeqCst) == 0 {
                panic!("worker died");
            }
            branin_like(x)
        };
        let run = run_parallel(&flaky, &unit2(), ObjectiveSense::Minimize, &Budget::evaluations(10), &EngineConfig::default(), 2, 1)
            .unwrap();
        assert_eq!(run.result.evaluations.len(), 10);
        assert!(run.result.evaluations.iter().all(|r| !r.failed));
        assert!(run.events.iter().any(|e| matches!(e.kind, EventKind::Requeued { .. })));
    }

    #[test]
    fn zero_workers_rejected() {
        let err = run_parallel(&branin_like, &unit2(), ObjectiveSense::Minimize, &Budget::evaluations(10), &EngineConfig::default(), 0, 1)
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn target_stops_parallel_run() {
        let budget = Budget { max_evaluations: Some(200), target_value: Some(0.0), ..Default::default() };
        let run = run_parallel(&branin_like, &unit2(), ObjectiveSense::Minimize, &budget, &EngineConfig::default(), 4, 2).unwrap();
        assert_eq!(run.result.stopped_because, StopReason::TargetReached);
        assert!(audit(&run.events).clean());
    }
}
