//! Box domains with integrality, point scaling, and evaluation records.
//!
//! Every distance in the optimizer is measured in the scaled unit hypercube,
//! and all internal logic minimizes. [`ObjectiveSense`] is the single place
//! where a maximization problem is turned around.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::DomainError;

/// Tolerance used when deciding that two scaled points coincide.
pub const COINCIDENCE_TOL: f64 = 1e-12;

/// A hyperrectangle `[lower, upper]` with a subset of integer-constrained dimensions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    integer_dims: Vec<usize>,
    #[serde(skip)]
    is_integer: Vec<bool>,
}

impl BoxDomain {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        integer_dims: impl IntoIterator<Item = usize>,
    ) -> Result<Self, DomainError> {
        if lower.is_empty() {
            return Err(DomainError::Empty);
        }
        if lower.len() != upper.len() {
            return Err(DomainError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(DomainError::InvalidBounds { dim: i, lower: lo, upper: hi });
            }
        }
        let n = lower.len();
        let mut is_integer = vec![false; n];
        for i in integer_dims {
            if i >= n {
                return Err(DomainError::IntegerIndexOutOfRange { index: i, n });
            }
            if lower[i].fract() != 0.0 || upper[i].fract() != 0.0 {
                return Err(DomainError::FractionalIntegerBounds {
                    dim: i,
                    lower: lower[i],
                    upper: upper[i],
                });
            }
            is_integer[i] = true;
        }
        let integer_dims = (0..n).filter(|&i| is_integer[i]).collect();
        Ok(Self { lower, upper, integer_dims, is_integer })
    }

    /// A continuous domain with the same bounds in every dimension.
    pub fn uniform(n: usize, lower: f64, upper: f64) -> Result<Self, DomainError> {
        Self::new(vec![lower; n], vec![upper; n], [])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn integer_dims(&self) -> &[usize] {
        &self.integer_dims
    }

    pub fn is_integer(&self, i: usize) -> bool {
        self.is_integer[i]
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    fn check_len(&self, x: &[f64]) -> Result<(), DomainError> {
        if x.len() != self.dim() {
            return Err(DomainError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }

    /// True when `x` is in the box and every integer dimension holds an integer.
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.contains(x) && self.integer_dims.iter().all(|&i| x[i].fract() == 0.0)
    }

    pub fn scale_to_unit(&self, x: &[f64]) -> Result<Vec<f64>, DomainError> {
        self.check_len(x)?;
        if let Some(i) = (0..self.dim()).find(|&i| !(x[i] >= self.lower[i] && x[i] <= self.upper[i])) {
            return Err(DomainError::OutOfBounds {
                dim: i,
                value: x[i],
                lower: self.lower[i],
                upper: self.upper[i],
            });
        }
        Ok(self.scale_unchecked(x))
    }

    pub(crate) fn scale_unchecked(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| (v - self.lower[i]) / self.width(i))
            .collect()
    }

    /// Inverse of [`scale_to_unit`](Self::scale_to_unit). Input outside `[0,1]` is clamped.
    pub fn unscale(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &v)| {
                let raw = self.lower[i] + v.clamp(0.0, 1.0) * self.width(i);
                raw.clamp(self.lower[i], self.upper[i])
            })
            .collect()
    }

    /// Rounds integer dimensions to the nearest integer (half away from zero), then clamps.
    pub fn snap_integers(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.snap_in_place(&mut out);
        out
    }

    pub fn snap_in_place(&self, x: &mut [f64]) {
        for &i in &self.integer_dims {
            x[i] = x[i].round().clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Snaps a scaled point in raw space and returns it scaled again.
    pub fn snap_scaled(&self, u: &mut [f64]) {
        if self.integer_dims.is_empty() {
            return;
        }
        for &i in &self.integer_dims {
            let raw = (self.lower[i] + u[i].clamp(0.0, 1.0) * self.width(i))
                .round()
                .clamp(self.lower[i], self.upper[i]);
            u[i] = (raw - self.lower[i]) / self.width(i);
        }
    }

    /// A uniform draw from the box. Integer dimensions are uniform over
    /// their integer values rather than snapped from a continuous draw, so
    /// end points are not under-weighted.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                if self.is_integer[i] {
                    rng.random_range(self.lower[i] as i64..=self.upper[i] as i64) as f64
                } else {
                    self.lower[i] + rng.random::<f64>() * self.width(i)
                }
            })
            .collect()
    }

    /// Euclidean distance from `x` (raw) to the closest node, measured in scaled space.
    pub fn min_scaled_distance(&self, x: &[f64], nodes: &NodeSet) -> Result<f64, DomainError> {
        self.check_len(x)?;
        if nodes.is_empty() {
            return Err(DomainError::EmptyNodeSet);
        }
        let u = self.scale_unchecked(x);
        Ok(nodes.min_distance_scaled(&u))
    }
}

/// Direction of optimization as seen by the user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveSense {
    #[default]
    Minimize,
    Maximize,
}

impl ObjectiveSense {
    /// User value to internal (minimization) value.
    pub fn to_internal(self, value: f64) -> f64 {
        match self {
            ObjectiveSense::Minimize => value,
            ObjectiveSense::Maximize => -value,
        }
    }

    /// Internal value back to the user's sense. Negation is its own inverse.
    pub fn to_user(self, value: f64) -> f64 {
        self.to_internal(value)
    }

    /// True when `a` is at least as good as `b`, both in user sense.
    pub fn at_least_as_good(self, a: f64, b: f64) -> bool {
        match self {
            ObjectiveSense::Minimize => a <= b,
            ObjectiveSense::Maximize => a >= b,
        }
    }

    pub fn better(self, a: f64, b: f64) -> f64 {
        if self.at_least_as_good(a, b) {
            a
        } else {
            b
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    InitialDesign,
    Search,
    Temporary,
}

/// One evaluated point. `value` is always in internal minimization sense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub point: Vec<f64>,
    pub value: f64,
    pub kind: RecordKind,
    pub sequence_id: u64,
    pub weight_used: Option<f64>,
    /// The objective raised or returned garbage; `value` holds the penalty.
    pub failed: bool,
    /// Milliseconds since run start at completion.
    pub t_wall_ms: f64,
    /// Worker that produced the value (0 in serial runs).
    pub worker: usize,
}

/// The interpolation set: scaled points, internal values, and temporary flags.
#[derive(Debug, Clone, Default)]
pub struct NodeSet {
    dim: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    temporary: Vec<bool>,
}

impl NodeSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, ..Default::default() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, scaled_point: Vec<f64>, value: f64, temporary: bool) {
        debug_assert_eq!(scaled_point.len(), self.dim);
        self.points.push(scaled_point);
        self.values.push(value);
        self.temporary.push(temporary);
    }

    pub fn remove(&mut self, index: usize) -> (Vec<f64>, f64, bool) {
        (
            self.points.remove(index),
            self.values.remove(index),
            self.temporary.remove(index),
        )
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn set_value(&mut self, index: usize, value: f64) {
        self.values[index] = value;
    }

    pub fn is_temporary(&self, index: usize) -> bool {
        self.temporary[index]
    }

    pub fn temporary_count(&self) -> usize {
        self.temporary.iter().filter(|&&t| t).count()
    }

    /// `[min, max]` over non-temporary values, if any exist.
    pub fn real_value_range(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .zip(&self.temporary)
            .filter(|(_, &t)| !t)
            .fold(None, |acc, (&v, _)| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }

    /// Minimum Euclidean distance from a scaled point to any node (temporary included).
    /// Returns `+inf` for an empty set.
    pub fn min_distance_scaled(&self, u: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|p| squared_distance(p, u))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
