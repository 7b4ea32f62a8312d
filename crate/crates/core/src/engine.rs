//! The serial optimization loop and the bookkeeping shared with the
//! parallel scheduler.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::design::latin_hypercube;
use crate::domain::{BoxDomain, EvalRecord, NodeSet, ObjectiveSense, RecordKind};
use crate::error::{ConfigError, Error, EvalError, ProposerError, Result};
use crate::proposer::{propose_step, GaConfig, SearchStep, WeightCycle};
use crate::rng::RngStream;
use crate::surrogate::{fit, Kernel, RbfModel};

pub const DEFAULT_MAX_CONSECUTIVE_FAILURES: usize = 10;

/// Something that can be evaluated at a raw, integer-snapped point.
///
/// Values are in the user's sense. Plain closures `Fn(&[f64]) -> f64`
/// implement this directly; wrap fallible closures in [`Fallible`].
pub trait Objective: Sync {
    fn evaluate(&self, x: &[f64]) -> std::result::Result<f64, EvalError>;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, x: &[f64]) -> std::result::Result<f64, EvalError> {
        Ok(self(x))
    }
}

/// Adapter for closures that can report failure.
pub struct Fallible<F>(pub F);

impl<F> Objective for Fallible<F>
where
    F: Fn(&[f64]) -> std::result::Result<f64, EvalError> + Sync,
{
    fn evaluate(&self, x: &[f64]) -> std::result::Result<f64, EvalError> {
        (self.0)(x)
    }
}

/// Calls the objective, turning panics and non-finite values into errors.
pub(crate) fn guarded_eval(objective: &dyn Objective, x: &[f64]) -> std::result::Result<f64, EvalError> {
    match catch_unwind(AssertUnwindSafe(|| objective.evaluate(x))) {
        Ok(Ok(v)) if v.is_finite() => Ok(v),
        Ok(Ok(_)) => Err(EvalError::NonFinite),
        Ok(Err(e)) => Err(e),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            Err(EvalError::Crashed(msg))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_evaluations: Option<usize>,
    pub max_wallclock: Option<Duration>,
    /// User-sense value; reaching it (or better) stops the run.
    pub target_value: Option<f64>,
}

impl Budget {
    pub fn evaluations(max: usize) -> Self {
        Self { max_evaluations: Some(max), ..Default::default() }
    }

    pub fn validate(&self, design_size: usize) -> std::result::Result<(), ConfigError> {
        if self.max_evaluations.is_none() && self.max_wallclock.is_none() && self.target_value.is_none() {
            return Err(ConfigError::NoStoppingCriterion);
        }
        if let Some(max) = self.max_evaluations {
            if max < design_size {
                return Err(ConfigError::BudgetBelowDesign { max, design: design_size });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub kernel: Kernel,
    pub weights: WeightCycle,
    /// `None` picks [`GaConfig::for_dimension`].
    pub ga: Option<GaConfig>,
    /// Initial design size; `None` means `n + 1`.
    pub design_size: Option<usize>,
    pub max_consecutive_failures: usize,
    #[serde(default)]
    pub value_transform: ValueTransform,
    /// Scaled half-widths of the local steps that close each pass through
    /// `weights`, used in turn. Empty means global steps only.
    #[serde(default = "default_local_radii")]
    pub local_radii: Vec<f64>,
}

pub const DEFAULT_LOCAL_RADII: [f64; 3] = [0.2, 0.05, 0.01];

fn default_local_radii() -> Vec<f64> {
    DEFAULT_LOCAL_RADII.to_vec()
}

/// How node values are reshaped before the surrogate is fit. Archive
/// values are never touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueTransform {
    /// Fit the values as they are.
    #[default]
    Identity,
    /// Replace values above the median by the median, so a few huge
    /// values do not flatten the model where it matters.
    ClipMedian,
}

impl ValueTransform {
    pub fn apply(self, values: &[f64]) -> Vec<f64> {
        match self {
            ValueTransform::Identity => values.to_vec(),
            ValueTransform::ClipMedian => {
                let mut sorted = values.to_vec();
                sorted.sort_by(f64::total_cmp);
                let k = sorted.len();
                if k == 0 {
                    return Vec::new();
                }
                let median = if k % 2 == 1 { sorted[k / 2] } else { 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]) };
                values.iter().map(|&v| v.min(median)).collect()
            }
        }
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::ThinPlateSpline,
            weights: WeightCycle::default(),
            ga: None,
            design_size: None,
            max_consecutive_failures: DEFAULT_MAX_CONSECUTIVE_FAILURES,
            value_transform: ValueTransform::default(),
            local_radii: default_local_radii(),
        }
    }
}

impl EngineConfig {
    pub fn design_size(&self, n: usize) -> usize {
        self.design_size.unwrap_or(n + 1)
    }

    /// Step for the `ticket`-th proposal: each pass through the weight cycle
    /// is followed by one local step.
    pub fn step_for(&self, ticket: u64) -> SearchStep {
        let global = self.weights.weights().len() as u64;
        if self.local_radii.is_empty() {
            return SearchStep::Global { weight: self.weights.weight_for(ticket) };
        }
        let (pass, slot) = (ticket / (global + 1), ticket % (global + 1));
        if slot < global {
            SearchStep::Global { weight: self.weights.weight_for(slot) }
        } else {
            SearchStep::Local { radius: self.local_radii[(pass % self.local_radii.len() as u64) as usize] }
        }
    }

    pub fn ga_for(&self, n: usize) -> GaConfig {
        self.ga.unwrap_or_else(|| GaConfig::for_dimension(n))
    }

    pub fn validate(&self, n: usize) -> std::result::Result<(), ConfigError> {
        if self.design_size(n) < n + 1 {
            return Err(ConfigError::Invalid(format!(
                "design size {} is below n + 1 = {}",
                self.design_size(n),
                n + 1
            )));
        }
        if self.local_radii.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(ConfigError::Invalid("local radii must lie in (0, 1]".into()));
        }
        self.ga_for(n).validate().map_err(ConfigError::Invalid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EvalsExhausted,
    TimeExhausted,
    TargetReached,
    ProposerSaturated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_point: Vec<f64>,
    /// User sense.
    pub best_value: f64,
    pub evaluations: Vec<EvalRecord>,
    pub stopped_because: StopReason,
    pub sense: ObjectiveSense,
}

impl OptimizationResult {
    pub fn user_values(&self) -> Vec<f64> {
        self.evaluations.iter().map(|r| self.sense.to_user(r.value)).collect()
    }
}

/// Best user-sense value among the first `t` evaluations, for every `t`.
pub fn best_so_far_trace(result: &OptimizationResult) -> Vec<f64> {
    trace_of(&result.user_values(), result.sense)
}

pub(crate) fn trace_of(values: &[f64], sense: ObjectiveSense) -> Vec<f64> {
    let mut best = None::<f64>;
    values
        .iter()
        .map(|&v| {
            let b = best.map_or(v, |b| sense.better(b, v));
            best = Some(b);
            b
        })
        .collect()
}

/// The record of real evaluations of one run.
///
/// Failed evaluations receive the penalty `max + span` of the successful
/// values seen so far (span = max − min, or 1 when that is zero). Failures
/// that happen before any success are re-penalized as soon as one arrives.
pub(crate) struct Archive {
    pub domain: BoxDomain,
    pub sense: ObjectiveSense,
    pub records: Vec<EvalRecord>,
    scaled: Vec<Vec<f64>>,
    provisional: Vec<usize>,
    successes: usize,
    consecutive_failures: usize,
    max_consecutive_failures: usize,
    pub start: Instant,
}

impl Archive {
    pub fn new(domain: BoxDomain, sense: ObjectiveSense, max_consecutive_failures: usize) -> Self {
        Self {
            domain,
            sense,
            records: Vec::new(),
            scaled: Vec::new(),
            provisional: Vec::new(),
            successes: 0,
            consecutive_failures: 0,
            max_consecutive_failures,
            start: Instant::now(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn successes(&self) -> usize {
        self.successes
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    fn success_range(&self) -> Option<(f64, f64)> {
        self.records.iter().filter(|r| !r.failed).fold(None, |acc, r| match acc {
            None => Some((r.value, r.value)),
            Some((lo, hi)) => Some((lo.min(r.value), hi.max(r.value))),
        })
    }

    fn penalty(&self) -> Option<f64> {
        self.success_range().map(|(lo, hi)| {
            let span = hi - lo;
            hi + if span > 0.0 { span } else { 1.0 }
        })
    }

    /// Records an evaluation outcome. `outcome` is in user sense.
    pub fn ingest(
        &mut self,
        point: Vec<f64>,
        outcome: std::result::Result<f64, EvalError>,
        kind: RecordKind,
        weight_used: Option<f64>,
        worker: usize,
    ) -> Result<&EvalRecord> {
        let t_wall_ms = self.start.elapsed().as_secs_f64() * 1e3;
        let scaled = self.domain.scale_unchecked(&point);
        let (value, failed) = match &outcome {
            Ok(v) => (self.sense.to_internal(*v), false),
            Err(_) => (self.penalty().unwrap_or(0.0), true),
        };
        let idx = self.records.len();
        self.records.push(EvalRecord {
            point,
            value,
            kind,
            sequence_id: idx as u64,
            weight_used,
            failed,
            t_wall_ms,
            worker,
        });
        self.scaled.push(scaled);
        match outcome {
            Ok(_) => {
                self.successes += 1;
                self.consecutive_failures = 0;
                if !self.provisional.is_empty() {
                    let penalty = self.penalty().expect("a success exists");
                    for i in std::mem::take(&mut self.provisional) {
                        self.records[i].value = penalty;
                    }
                }
            }
            Err(e) => {
                if self.successes == 0 {
                    self.provisional.push(idx);
                }
                self.consecutive_failures += 1;
                if self.consecutive_failures >= self.max_consecutive_failures {
                    return Err(Error::TooManyFailures { count: self.consecutive_failures, last: e });
                }
            }
        }
        Ok(&self.records[idx])
    }

    /// Real nodes in scaled coordinates with internal values.
    pub fn nodes(&self) -> NodeSet {
        let mut nodes = NodeSet::new(self.domain.dim());
        for (p, r) in self.scaled.iter().zip(&self.records) {
            nodes.push(p.clone(), r.value, false);
        }
        nodes
    }

    pub fn best_internal(&self) -> Option<f64> {
        self.records.iter().map(|r| r.value).reduce(f64::min)
    }

    pub fn target_reached(&self, target: Option<f64>) -> bool {
        match (target, self.best_internal()) {
            (Some(t), Some(b)) if self.successes > 0 => b <= self.sense.to_internal(t),
            _ => false,
        }
    }

    pub fn into_result(self, stopped_because: StopReason) -> Result<OptimizationResult> {
        if self.successes == 0 {
            return Err(Error::NoSuccessfulEvaluations);
        }
        let best = self
            .records
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
            .map(|(_, r)| r)
            .expect("nonempty");
        Ok(OptimizationResult {
            best_point: best.point.clone(),
            best_value: self.sense.to_user(best.value),
            evaluations: self.records,
            stopped_because,
            sense: self.sense,
        })
    }
}

/// Fits the surrogate; a fit failure yields `None` and the proposer falls
/// back to the distance criterion alone.
pub(crate) fn fit_or_none(nodes: &NodeSet, config: &EngineConfig) -> Option<RbfModel> {
    fit(nodes.points(), &config.value_transform.apply(nodes.values()), config.kernel).ok()
}

pub(crate) fn stream_names(seed: u64) -> (RngStream, RngStream) {
    (RngStream::new(seed, "design"), RngStream::new(seed, "proposer"))
}

/// Minimizes (or maximizes) `objective` over `domain`.
pub fn optimize(
    objective: &dyn Objective,
    domain: &BoxDomain,
    sense: ObjectiveSense,
    budget: &Budget,
    config: &EngineConfig,
    seed: u64,
) -> Result<OptimizationResult> {
    let n = domain.dim();
    config.validate(n)?;
    budget.validate(config.design_size(n))?;
    let (design_stream, proposer_stream) = stream_names(seed);
    let design = latin_hypercube(domain, config.design_size(n), &design_stream)?;
    let ga = config.ga_for(n);

    let mut archive = Archive::new(domain.clone(), sense, config.max_consecutive_failures);
    let exhausted = |archive: &Archive| -> Option<StopReason> {
        if budget.max_evaluations.is_some_and(|m| archive.len() >= m) {
            Some(StopReason::EvalsExhausted)
        } else if budget.max_wallclock.is_some_and(|t| archive.elapsed() >= t) {
            Some(StopReason::TimeExhausted)
        } else {
            None
        }
    };

    for point in design.points {
        if let Some(reason) = exhausted(&archive) {
            return archive.into_result(reason);
        }
        let outcome = guarded_eval(objective, &point);
        archive.ingest(point, outcome, RecordKind::InitialDesign, None, 0)?;
        if archive.target_reached(budget.target_value) {
            return archive.into_result(StopReason::TargetReached);
        }
    }

    let mut ticket = 0u64;
    loop {
        if let Some(reason) = exhausted(&archive) {
            return archive.into_result(reason);
        }
        if archive.successes() == 0 {
            return Err(Error::NoSuccessfulEvaluations);
        }
        let nodes = archive.nodes();
        let model = fit_or_none(&nodes, config);
        let step = config.step_for(ticket);
        let proposal =
            match propose_step(model.as_ref(), &nodes, domain, step, &ga, &proposer_stream.child(ticket)) {
                Ok(p) => p,
                Err(ProposerError::Saturated { .. }) => {
                    return archive.into_result(StopReason::ProposerSaturated);
                }
                Err(e) => return Err(e.into()),
            };
        ticket += 1;
        let outcome = guarded_eval(objective, &proposal.point);
        archive.ingest(proposal.point, outcome, RecordKind::Search, Some(proposal.weight_used), 0)?;
        if archive.target_reached(budget.target_value) {
            return archive.into_result(StopReason::TargetReached);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| (v - 0.3).powi(2)).sum()
    }

    #[test]
    fn converges_on_shifted_sphere() {
        // Grid oracle: the minimum of Σ(x−0.3)² on [0,1]² is 0.
        let grid_min = (0..=100)
            .flat_map(|i| (0..=100).map(move |j| sphere(&[i as f64 / 100.0, j as f64 / 100.0])))
            .fold(f64::INFINITY, f64::min);
        assert!(grid_min < 1e-12);
        let d = BoxDomain::uniform(2, 0.0, 1.0).unwrap();
        let r = optimize(&sphere, &d, ObjectiveSense::Minimize, &Budget::evaluations(180), &EngineConfig::default(), 1)
            .unwrap();
        assert!(r.best_value - grid_min <= 1e-3, "{}", r.best_value);
        assert_eq!(r.evaluations.len(), 180);
    }

    #[test]
    fn design_only_budget() {
        let d = BoxDomain::uniform(3, 0.0, 1.0).unwrap();
        let r = optimize(&sphere, &d, ObjectiveSense::Minimize, &Budget::evaluations(4), &EngineConfig::default(), 1)
            .unwrap();
        assert_eq!(r.evaluations.len(), 4);
        assert!(r.evaluations.iter().all(|e| e.kind == RecordKind::InitialDesign));
        assert_eq!(r.stopped_because, StopReason::EvalsExhausted);
    }

    #[test]
    fn maximize_mirrors_minimize() {
        let d = BoxDomain::uniform(2, 0.0, 1.0).unwrap();
        let neg = |x: &[f64]| -sphere(x);
        let cfg = EngineConfig::default();
        let a = optimize(&sphere, &d, ObjectiveSense::Minimize, &Budget::evaluations(30), &cfg, 5).unwrap();
        let b = optimize(&neg, &d, ObjectiveSense::Maximize, &Budget::evaluations(30), &cfg, 5).unwrap();
        let pa: Vec<_> = a.evaluations.iter().map(|e| &e.point).collect();
        let pb: Vec<_> = b.evaluations.iter().map(|e| &e.point).collect();
        assert_eq!(pa, pb);
        assert_eq!(a.best_value, -b.best_value);
    }

    #[test]
    fn trace_examples() {
        assert_eq!(trace_of(&[3.0, 5.0, 4.0], ObjectiveSense::Maximize), vec![3.0, 5.0, 5.0]);
        assert_eq!(trace_of(&[3.0, 5.0, 4.0], ObjectiveSense::Minimize), vec![3.0, 3.0, 3.0]);
        assert_eq!(trace_of(&[7.0], ObjectiveSense::Minimize), vec![7.0]);
    }

    #[test]
    fn trace_ends_at_best_and_no_duplicates() {
        let d = BoxDomain::new(vec![0.0, -3.0], vec![1.0, 3.0], [1]).unwrap();
        let r = optimize(&sphere, &d, ObjectiveSense::Minimize, &Budget::evaluations(40), &EngineConfig::default(), 3)
            .unwrap();
        let trace = best_so_far_trace(&r);
        assert_eq!(*trace.last().unwrap(), r.best_value);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        for i in 0..r.evaluations.len() {
            assert!(d.is_feasible(&r.evaluations[i].point));
            for j in 0..i {
                assert_ne!(r.evaluations[i].point, r.evaluations[j].point);
            }
        }
    }

    #[test]
    fn failures_are_penalized_and_run_continues() {
        let d = BoxDomain::uniform(2, 0.0, 1.0).unwrap();
        let f = Fallible(|x: &[f64]| if x[0] > 0.7 { Err(EvalError::Reported("diverged".into())) } else { Ok(sphere(x)) });
        let r = optimize(&f, &d, ObjectiveSense::Minimize, &Budget::evaluations(40), &EngineConfig::default(), 2)
            .unwrap();
        assert_eq!(r.evaluations.len(), 40);
        let ok_min = r.evaluations.iter().filter(|e| !e.failed).map(|e| e.value).fold(f64::MAX, f64::min);
        assert!(r.evaluations.iter().any(|e| e.failed));
        for e in r.evaluations.iter().filter(|e| e.failed) {
            assert!(e.value.is_finite() && e.value > ok_min);
        }
        assert!(r.best_value < 0.05);
    }

    #[test]
    fn panics_count_as_failures() {
        let d = BoxDomain::uniform(1, 0.0, 1.0).unwrap();
        let f = |x: &[f64]| {
            if x[0] < 0.5 {
                panic!("boom")
            }
            x[0]
        };
        let r = optimize(&f, &d, ObjectiveSense::Minimize, &Budget::evaluations(12), &EngineConfig::default(), 0);
        let r = r.unwrap();
        assert!(r.evaluations.iter().any(|e| e.failed));
    }

    #[test]
    fn too_many_failures_abort() {
        let d = BoxDomain::uniform(2, 0.0, 1.0).unwrap();
        let f = Fallible(|_: &[f64]| Err(EvalError::Reported("nope".into())));
        let err = optimize(&f, &d, ObjectiveSense::Minimize, &Budget::evaluations(50), &EngineConfig::default(), 0)
            .unwrap_err();
        assert!(matches!(err, Error::NoSuccessfulEvaluations | Error::TooManyFailures { .. }));
    }

    #[test]
    fn target_and_time_budgets() {
        let d = BoxDomain::uniform(2, 0.0, 1.0).unwrap();
        let budget = Budget { max_evaluations: Some(200), target_value: Some(0.05), ..Default::default() };
        let r = optimize(&sphere, &d, ObjectiveSense::Minimize, &budget, &EngineConfig::default(), 4).unwrap();
        assert_eq!(r.stopped_because, StopReason::TargetReached);
        assert!(r.best_value <= 0.05);

        let slow = |x: &[f64]| {
            std::thread::sleep(Duration::from_millis(5));
            sphere(x)
        };
        let budget = Budget { max_wallclock: Some(Duration::from_millis(60)), ..Default::default() };
        let r = optimize(&slow, &d, ObjectiveSense::Minimize, &budget, &EngineConfig::default(), 4).unwrap();
        assert_eq!(r.stopped_because, StopReason::TimeExhausted);
        assert!(r.evaluations.len() < 20);
    }

    #[test]
    fn budget_validation() {
        assert_eq!(Budget::default().validate(3), Err(ConfigError::NoStoppingCriterion));
        assert_eq!(
            Budget::evaluations(2).validate(3),
            Err(ConfigError::BudgetBelowDesign { max: 2, design: 3 })
        );
    }

    #[test]
    fn saturated_domain_stops_cleanly() {
        let d = BoxDomain::new(vec![0.0], vec![3.0], [0]).unwrap();
        let r = optimize(&|x: &[f64]| x[0], &d, ObjectiveSense::Minimize, &Budget::evaluations(50), &EngineConfig::default(), 0)
            .unwrap();
        assert_eq!(r.evaluations.len(), 4);
        assert_eq!(r.stopped_because, StopReason::ProposerSaturated);
        assert_eq!(r.best_value, 0.0);
    }

    #[test]
    fn schedule_closes_each_cycle_with_a_local_step() {
        let cfg = EngineConfig::default();
        let steps: Vec<SearchStep> = (0..18).map(|t| cfg.step_for(t)).collect();
        for (t, s) in steps.iter().enumerate() {
            match (t % 6, s) {
                (5, SearchStep::Local { radius }) => assert_eq!(*radius, DEFAULT_LOCAL_RADII[t / 6]),
                (slot, SearchStep::Global { weight }) if slot < 5 => {
                    assert_eq!(*weight, crate::proposer::DEFAULT_WEIGHTS[slot])
                }
                other => panic!("ticket {t}: {other:?}"),
            }
        }
        let global_only = EngineConfig { local_radii: vec![], ..EngineConfig::default() };
        assert_eq!(global_only.step_for(7), SearchStep::Global { weight: crate::proposer::DEFAULT_WEIGHTS[2] });
        let bad = EngineConfig { local_radii: vec![0.0], ..EngineConfig::default() };
        assert!(bad.validate(2).is_err());
    }

    #[test]
    fn median_clip() {
        assert_eq!(ValueTransform::ClipMedian.apply(&[5.0, 1.0, 100.0]), vec![5.0, 1.0, 5.0]);
        assert_eq!(ValueTransform::ClipMedian.apply(&[4.0, 1.0, 2.0, 100.0]), vec![3.0, 1.0, 2.0, 3.0]);
        assert_eq!(ValueTransform::Identity.apply(&[3.0, -1.0]), vec![3.0, -1.0]);
        assert!(ValueTransform::ClipMedian.apply(&[]).is_empty());
    }
}
