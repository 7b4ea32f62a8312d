//! Randomized Latin hypercube initial designs.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::domain::BoxDomain;
use crate::error::DesignError;
use crate::rng::{RngStream, StreamRng};

/// Smallest singular value relative to the largest below which the
/// augmented matrix `[X 1]` is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

const MAX_ATTEMPTS: usize = 100;
const MAX_PERTURBATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct InitialDesign {
    /// Raw, integer-snapped points.
    pub points: Vec<Vec<f64>>,
    /// Scaled coordinates before integer snapping; each column is stratified.
    pub unit_points: Vec<Vec<f64>>,
    /// `[X 1]` has full column rank and the points are pairwise distinct.
    pub rank_ok: bool,
    /// Number of fresh draws used (1 when the first design was poised).
    pub attempts: usize,
}

/// True when the rows `(x_i, 1)` span a space of dimension `n + 1`.
pub fn is_poised(points: &[Vec<f64>]) -> bool {
    let Some(first) = points.first() else {
        return false;
    };
    let n = first.len();
    if points.len() < n + 1 {
        return false;
    }
    let m = DMatrix::from_fn(points.len(), n + 1, |i, j| if j < n { points[i][j] } else { 1.0 });
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    max > 0.0 && min / max > RANK_TOL
}

fn first_duplicate(points: &[Vec<f64>]) -> Option<(usize, usize)> {
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if points[i] == points[j] {
                return Some((i, j));
            }
        }
    }
    None
}

fn acceptable(points: &[Vec<f64>]) -> bool {
    first_duplicate(points).is_none() && is_poised(points)
}

/// Stratum assignment per dimension: `strata[dim][row]`.
fn draw_strata(n: usize, k: usize, rng: &mut StreamRng) -> Vec<Vec<usize>> {
    (0..n)
        .map(|_| {
            let mut perm: Vec<usize> = (0..k).collect();
            perm.shuffle(rng);
            perm
        })
        .collect()
}

fn place(strata: &[Vec<usize>], k: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let n = strata.len();
    (0..k)
        .map(|row| {
            (0..n)
                .map(|dim| (strata[dim][row] as f64 + rng.random::<f64>()) / k as f64)
                .collect()
        })
        .collect()
}

fn realize(d: &BoxDomain, unit: &[Vec<f64>]) -> Vec<Vec<f64>> {
    unit.iter().map(|u| d.snap_integers(&d.unscale(u))).collect()
}

/// Draws a `k`-point Latin hypercube design in `d`, snapping integer
/// dimensions and redrawing until the design is poised for a linear tail.
pub fn latin_hypercube(d: &BoxDomain, k: usize, stream: &RngStream) -> Result<InitialDesign, DesignError> {
    let n = d.dim();
    if k < n + 1 {
        return Err(DesignError::TooFewPoints { k, min: n + 1 });
    }
    let mut rng = stream.rng();
    let mut strata = Vec::new();
    let mut unit = Vec::new();
    for attempt in 1..=MAX_ATTEMPTS {
        strata = draw_strata(n, k, &mut rng);
        unit = place(&strata, k, &mut rng);
        let points = realize(d, &unit);
        if acceptable(&points) {
            return Ok(InitialDesign { points, unit_points: unit, rank_ok: true, attempts: attempt });
        }
    }

    // Swap strata between a degenerate row and a random partner in one
    // dimension at a time; stratification is preserved by every swap.
    let mut points = realize(d, &unit);
    for _ in 0..MAX_PERTURBATIONS {
        let row = match first_duplicate(&points) {
            Some((_, j)) => j,
            None => rng.random_range(0..k),
        };
        let dim = rng.random_range(0..n);
        let other = rng.random_range(0..k);
        strata[dim].swap(row, other);
        for r in [row, other] {
            unit[r][dim] = (strata[dim][r] as f64 + rng.random::<f64>()) / k as f64;
            points[r] = d.snap_integers(&d.unscale(&unit[r]));
        }
        if acceptable(&points) {
            return Ok(InitialDesign {
                points,
                unit_points: unit,
                rank_ok: true,
                attempts: MAX_ATTEMPTS,
            });
        }
    }
    let diagnostic = match first_duplicate(&points) {
        Some((i, j)) => format!("rows {i} and {j} coincide after snapping"),
        None => "augmented matrix [X 1] is rank deficient after snapping".to_string(),
    };
    Err(DesignError::NotPoised { attempts: MAX_ATTEMPTS, diagnostic })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stratified(design: &InitialDesign) -> bool {
        let k = design.unit_points.len();
        let n = design.unit_points[0].len();
        (0..n).all(|dim| {
            let mut cells: Vec<usize> = design
                .unit_points
                .iter()
                .map(|p| (p[dim] * k as f64).floor() as usize)
                .collect();
            cells.sort_unstable();
            cells == (0..k).collect::<Vec<_>>()
        })
    }

    #[test]
    fn one_dimension_two_points() {
        let d = BoxDomain::uniform(1, 0.0, 1.0).unwrap();
        let design = latin_hypercube(&d, 2, &RngStream::new(3, "design")).unwrap();
        let mut xs: Vec<f64> = design.points.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!(xs[0] < 0.5 && xs[1] >= 0.5);
    }

    #[test]
    fn two_dimensions_three_points() {
        let d = BoxDomain::uniform(2, 0.0, 1.0).unwrap();
        let design = latin_hypercube(&d, 3, &RngStream::new(11, "design")).unwrap();
        assert!(stratified(&design));
        assert!(design.rank_ok);
    }

    #[test]
    fn binary_integer_dimension_forced_to_both_values() {
        // Enumerating snapped outcomes of two draws on {0, 1}: (0,0), (0,1),
        // (1,0), (1,1). Only the mixed ones have rank 2.
        let outcomes = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let poised: Vec<_> = outcomes
            .iter()
            .filter(|o| is_poised(&[vec![o[0]], vec![o[1]]]))
            .collect();
        assert_eq!(poised.len(), 2);

        let d = BoxDomain::new(vec![0.0], vec![1.0], [0]).unwrap();
        for seed in 0..20 {
            let design = latin_hypercube(&d, 2, &RngStream::new(seed, "design")).unwrap();
            let mut xs: Vec<f64> = design.points.iter().map(|p| p[0]).collect();
            xs.sort_by(f64::total_cmp);
            assert_eq!(xs, vec![0.0, 1.0]);
        }
    }

    #[test]
    fn coarse_integer_grid_still_poised() {
        // Three binary dims and a continuous one; snapping collapses strata often.
        let d = BoxDomain::new(vec![0.0; 4], vec![1.0; 4], [0, 1, 2]).unwrap();
        for seed in 0..50 {
            let design = latin_hypercube(&d, 5, &RngStream::new(seed, "design")).unwrap();
            assert!(design.rank_ok && is_poised(&design.points));
            assert!(first_duplicate(&design.points).is_none());
            assert!(stratified(&design));
        }
    }

    #[test]
    fn impossible_design_reports_error() {
        // One binary dim cannot host three distinct points.
        let d = BoxDomain::new(vec![0.0], vec![1.0], [0]).unwrap();
        let err = latin_hypercube(&d, 3, &RngStream::new(0, "design")).unwrap_err();
        assert!(matches!(err, DesignError::NotPoised { .. }));
    }

    #[test]
    fn too_few_points() {
        let d = BoxDomain::uniform(3, 0.0, 1.0).unwrap();
        assert_eq!(
            latin_hypercube(&d, 3, &RngStream::new(0, "design")).unwrap_err(),
            DesignError::TooFewPoints { k: 3, min: 4 }
        );
    }

    #[test]
    fn deterministic() {
        let d = BoxDomain::new(vec![-5.0, 0.0, 0.0], vec![10.0, 15.0, 7.0], [2]).unwrap();
        let s = RngStream::new(99, "design");
        assert_eq!(latin_hypercube(&d, 6, &s).unwrap(), latin_hypercube(&d, 6, &s).unwrap());
    }
}
