//! Choosing the next evaluation point.
//!
//! Candidates are ranked by `w·Vs + (1−w)·Vd`, where `Vs` rewards a low
//! surrogate value and `Vd` rewards distance from existing nodes, both
//! normalized to `[0,1]` over the batch being scored. A small genetic
//! algorithm maximizes that score in the scaled unit box.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{BoxDomain, NodeSet};
use crate::error::ProposerError;
use crate::rng::RngStream;
use crate::surrogate::RbfModel;

pub const DEFAULT_WEIGHTS: [f64; 5] = [0.95, 0.75, 0.50, 0.25, 0.05];

const MUTATION_SIGMA: f64 = 0.1;
const FALLBACK_DRAWS: usize = 1000;

/// Cyclic schedule of the surrogate-merit weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightCycle {
    weights: Vec<f64>,
    position: usize,
}

impl WeightCycle {
    pub fn new(weights: Vec<f64>) -> Option<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return None;
        }
        Some(Self { weights, position: 0 })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight for the `ticket`-th proposal of a run.
    pub fn weight_for(&self, ticket: u64) -> f64 {
        self.weights[(ticket % self.weights.len() as u64) as usize]
    }

    /// Current weight; advances and wraps.
    pub fn next_weight(&mut self) -> f64 {
        let w = self.weights[self.position];
        self.position = (self.position + 1) % self.weights.len();
        w
    }
}

impl Default for WeightCycle {
    fn default() -> Self {
        Self { weights: DEFAULT_WEIGHTS.to_vec(), position: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub elite_fraction: f64,
}

impl GaConfig {
    pub fn for_dimension(n: usize) -> Self {
        Self {
            population_size: (20 * n).clamp(50, 400),
            generations: 20,
            mutation_rate: 0.1,
            elite_fraction: 0.25,
        }
    }

    pub fn elite_count(&self) -> usize {
        ((self.population_size as f64 * self.elite_fraction).ceil() as usize).clamp(1, self.population_size)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.population_size < 4 {
            return Err(format!("GA population_size must be >= 4, got {}", self.population_size));
        }
        if !(self.mutation_rate > 0.0 && self.mutation_rate < 1.0) {
            return Err(format!("GA mutation_rate must be in (0,1), got {}", self.mutation_rate));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return Err(format!("GA elite_fraction must be in (0,1], got {}", self.elite_fraction));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    TooClose,
    Degenerate,
}

/// Which rung of the fallback ladder produced the point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalOrigin {
    Search,
    DistanceRetry,
    RandomFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    /// Raw point, integers snapped.
    pub point: Vec<f64>,
    pub scaled: Vec<f64>,
    pub weight_used: f64,
    pub accepted: bool,
    /// Reason the first candidate was turned down, if it was.
    pub rejection_reason: Option<RejectionReason>,
    pub origin: ProposalOrigin,
}

/// Minimum scaled distance an accepted point keeps from every node.
pub fn min_acceptable_distance(n: usize) -> f64 {
    1e-3 * (n as f64).sqrt()
}

fn normalize(values: &[f64], higher_is_better: bool) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) || !range.is_finite() {
        return vec![0.5; values.len()];
    }
    values
        .iter()
        .map(|&v| if higher_is_better { (v - lo) / range } else { (hi - v) / range })
        .collect()
}

/// Scores scaled candidates; larger is better. Without a model the merit
/// term is constant and only distance matters.
pub fn score(model: Option<&RbfModel>, nodes: &NodeSet, candidates: &[Vec<f64>], w: f64) -> Vec<f64> {
    let vd = normalize(
        &candidates.iter().map(|c| nodes.min_distance_scaled(c)).collect::<Vec<_>>(),
        true,
    );
    let vs = match model {
        Some(m) => normalize(&candidates.iter().map(|c| m.predict(c)).collect::<Vec<_>>(), false),
        None => vec![0.5; candidates.len()],
    };
    vs.iter().zip(&vd).map(|(s, d)| w * s + (1.0 - w) * d).collect()
}

/// The score with its normalization frozen to the ranges seen over a
/// reference batch, so single candidates can be compared.
struct FrozenScore<'a> {
    model: Option<&'a RbfModel>,
    nodes: &'a NodeSet,
    w: f64,
    pred: (f64, f64),
    dist: (f64, f64),
}

impl<'a> FrozenScore<'a> {
    fn new(model: Option<&'a RbfModel>, nodes: &'a NodeSet, w: f64, reference: &[Vec<f64>]) -> Self {
        let range = |vals: &mut dyn Iterator<Item = f64>| {
            vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let pred = match model {
            Some(m) => range(&mut reference.iter().map(|c| m.predict(c))),
            None => (0.0, 0.0),
        };
        let dist = range(&mut reference.iter().map(|c| nodes.min_distance_scaled(c)));
        Self { model, nodes, w, pred, dist }
    }

    /// Points closer than the acceptance distance rank below every
    /// acceptable point, and farther is better among them.
    fn eval(&self, u: &[f64]) -> f64 {
        let dist = self.nodes.min_distance_scaled(u);
        let delta = min_acceptable_distance(self.nodes.dim());
        if dist < delta {
            return -2.0 - (delta - dist);
        }
        let scaled = |v: f64, (lo, hi): (f64, f64)| {
            let r = hi - lo;
            if r > 0.0 && r.is_finite() {
                (v - lo) / r
            } else {
                0.5
            }
        };
        let vs = match self.model {
            Some(m) => 1.0 - scaled(m.predict(u), self.pred),
            None => 0.5,
        };
        let vd = scaled(dist, self.dist);
        self.w * vs + (1.0 - self.w) * vd
    }
}

const POLISH_START: f64 = 0.02;
const POLISH_END: f64 = 1e-6;
const POLISH_MOVES_PER_DIM: usize = 40;

/// Compass search on the frozen score starting at the GA winner. The GA
/// finds the right basin but only resolves it to roughly its mutation
/// scale; this sharpens the point. Integer coordinates move by whole units.
fn polish(score: &FrozenScore, d: &BoxDomain, start: Vec<f64>) -> Vec<f64> {
    let n = d.dim();
    let unit: Vec<Option<f64>> = (0..n)
        .map(|i| d.integer_dims().contains(&i).then(|| 1.0 / (d.upper()[i] - d.lower()[i])))
        .collect();
    let mut x = start;
    let mut fx = score.eval(&x);
    let mut step = POLISH_START;
    let mut moves = 0;
    while step >= POLISH_END && moves < POLISH_MOVES_PER_DIM * n {
        let mut improved = false;
        for i in 0..n {
            let h = unit[i].unwrap_or(step);
            if unit[i].is_some() && step < POLISH_START {
                continue;
            }
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] = (y[i] + sign * h).clamp(0.0, 1.0);
                d.snap_scaled(&mut y);
                if y[i] == x[i] {
                    continue;
                }
                let fy = score.eval(&y);
                if fy > fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    moves += 1;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    x
}

/// Index of the largest score, ties to the lowest index.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Runs the genetic algorithm and returns the best scaled point found.
pub fn ga_argmax(
    model: Option<&RbfModel>,
    nodes: &NodeSet,
    w: f64,
    d: &BoxDomain,
    cfg: &GaConfig,
    stream: &RngStream,
) -> Vec<f64> {
    let n = d.dim();
    ga_in_box(model, nodes, w, d, &vec![0.0; n], &vec![1.0; n], cfg, stream)
}

/// The GA restricted to the scaled sub-box `[lo, hi]`; mutation steps
/// scale with the sub-box width. On the whole unit box this is exactly
/// [`ga_argmax`].
#[allow(clippy::too_many_arguments)]
fn ga_in_box(
    model: Option<&RbfModel>,
    nodes: &NodeSet,
    w: f64,
    d: &BoxDomain,
    lo: &[f64],
    hi: &[f64],
    cfg: &GaConfig,
    stream: &RngStream,
) -> Vec<f64> {
    let mut rng = stream.rng();
    let n = d.dim();
    let pop_size = cfg.population_size.max(4);
    let elite = cfg.elite_count();
    let mutation = Normal::new(0.0, MUTATION_SIGMA).expect("valid sigma");

    let mut population: Vec<Vec<f64>> = (0..pop_size)
        .map(|_| {
            let mut u: Vec<f64> = (0..n).map(|g| lo[g] + rng.random::<f64>() * (hi[g] - lo[g])).collect();
            d.snap_scaled(&mut u);
            u
        })
        .collect();

    for _ in 0..cfg.generations {
        let scores = score(model, nodes, &population, w);
        let mut order: Vec<usize> = (0..pop_size).collect();
        // Stable: equal scores keep population order.
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let parents: Vec<Vec<f64>> = order[..elite].iter().map(|&i| population[i].clone()).collect();

        let mut next = parents.clone();
        while next.len() < pop_size {
            let a = rng.random_range(0..elite);
            let b = if elite > 1 {
                let mut b = rng.random_range(0..elite - 1);
                if b >= a {
                    b += 1;
                }
                b
            } else {
                a
            };
            let mut child: Vec<f64> = (0..n)
                .map(|g| if rng.random::<bool>() { parents[a][g] } else { parents[b][g] })
                .collect();
            for (g, gene) in child.iter_mut().enumerate() {
                if rng.random::<f64>() < cfg.mutation_rate {
                    *gene = (*gene + mutation.sample(&mut rng) * (hi[g] - lo[g])).clamp(lo[g], hi[g]);
                }
            }
            d.snap_scaled(&mut child);
            next.push(child);
        }
        population = next;
    }
    let scores = score(model, nodes, &population, w);
    let frozen = FrozenScore::new(model, nodes, w, &population);
    let best = population[argmax(&scores)].clone();
    polish(&frozen, d, best)
}

/// One entry of the search schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStep {
    /// Bi-criterion search over the whole box.
    Global { weight: f64 },
    /// Surrogate minimization in a cube of this scaled half-width around
    /// the best real node.
    Local { radius: f64 },
}

impl SearchStep {
    /// Surrogate-merit weight the step searches with.
    pub fn weight(self) -> f64 {
        match self {
            SearchStep::Global { weight } => weight,
            SearchStep::Local { .. } => 1.0,
        }
    }
}

/// Scaled coordinates of the best non-temporary node.
fn best_real_node(nodes: &NodeSet) -> Option<&[f64]> {
    (0..nodes.len())
        .filter(|&i| !nodes.is_temporary(i))
        .min_by(|&a, &b| nodes.values()[a].total_cmp(&nodes.values()[b]))
        .map(|i| nodes.points()[i].as_slice())
}

/// Proposes the next point: GA search at weight `w`, a pure-distance retry,
/// then uniform random draws, stopping at the first point at least
/// [`min_acceptable_distance`] away from every node.
pub fn propose_with_weight(
    model: Option<&RbfModel>,
    nodes: &NodeSet,
    d: &BoxDomain,
    w: f64,
    cfg: &GaConfig,
    stream: &RngStream,
) -> Result<Proposal, ProposerError> {
    propose_step(model, nodes, d, SearchStep::Global { weight: w }, cfg, stream)
}

/// Like [`propose_with_weight`], for any step of the schedule. A local step
/// without a model has nothing to minimize and becomes a pure distance
/// search over the whole box.
pub fn propose_step(
    model: Option<&RbfModel>,
    nodes: &NodeSet,
    d: &BoxDomain,
    step: SearchStep,
    cfg: &GaConfig,
    stream: &RngStream,
) -> Result<Proposal, ProposerError> {
    let step = match (step, model) {
        (SearchStep::Local { .. }, None) => SearchStep::Global { weight: 0.0 },
        _ => step,
    };
    let w = step.weight();
    let delta = min_acceptable_distance(d.dim());
    let check = |u: &[f64]| -> Result<(), RejectionReason> {
        if u.iter().any(|v| !v.is_finite()) {
            return Err(RejectionReason::Degenerate);
        }
        if !nodes.is_empty() && nodes.min_distance_scaled(u) < delta {
            return Err(RejectionReason::TooClose);
        }
        Ok(())
    };
    let finish = |scaled: Vec<f64>, weight, reason, origin| Proposal {
        point: d.snap_integers(&d.unscale(&scaled)),
        scaled,
        weight_used: weight,
        accepted: true,
        rejection_reason: reason,
        origin,
    };

    let first = match (step, model, best_real_node(nodes)) {
        (SearchStep::Local { radius }, Some(_), Some(center)) => {
            let lo: Vec<f64> = center.iter().map(|c| (c - radius).max(0.0)).collect();
            let hi: Vec<f64> = center.iter().map(|c| (c + radius).min(1.0)).collect();
            ga_in_box(model, nodes, w, d, &lo, &hi, cfg, &stream.child(0))
        }
        _ => ga_argmax(model, nodes, w, d, cfg, &stream.child(0)),
    };
    let reason = match check(&first) {
        Ok(()) => return Ok(finish(first, w, None, ProposalOrigin::Search)),
        Err(r) => r,
    };
    let retry = ga_argmax(model, nodes, 0.0, d, cfg, &stream.child(1));
    if check(&retry).is_ok() {
        return Ok(finish(retry, 0.0, Some(reason), ProposalOrigin::DistanceRetry));
    }
    let mut rng = stream.child(2).rng();
    for _ in 0..FALLBACK_DRAWS {
        let mut u: Vec<f64> = (0..d.dim()).map(|_| rng.random::<f64>()).collect();
        d.snap_scaled(&mut u);
        if check(&u).is_ok() {
            return Ok(finish(u, 0.0, Some(reason), ProposalOrigin::RandomFallback));
        }
    }
    Err(ProposerError::Saturated { draws: FALLBACK_DRAWS })
}

/// [`propose_with_weight`] taking the weight from `cycle`.
pub fn propose(
    model: Option<&RbfModel>,
    nodes: &NodeSet,
    d: &BoxDomain,
    cycle: &mut WeightCycle,
    cfg: &GaConfig,
    stream: &RngStream,
) -> Result<Proposal, ProposerError> {
    let w = cycle.next_weight();
    propose_with_weight(model, nodes, d, w, cfg, stream)
}

/// True when `scaled` keeps the minimum distance from every node.
pub fn is_acceptable(nodes: &NodeSet, scaled: &[f64]) -> bool {
    nodes.is_empty() || nodes.min_distance_scaled(scaled) >= min_acceptable_distance(nodes.dim())
}
