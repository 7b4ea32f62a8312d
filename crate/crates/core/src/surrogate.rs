//! Radial basis function interpolation with a degree-1 polynomial tail.
//!
//! The interpolant is `s(x) = Σ λ_i φ(‖x − c_i‖) + aᵀx + b`, obtained from the
//! saddle-point system
//!
//! ```text
//! [ Φ   P ] [λ]   [f]
//! [ Pᵀ  0 ] [c] = [0]
//! ```
//!
//! where `P` has rows `(c_i, 1)`. All centers live in the scaled unit box.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::is_poised;
use crate::domain::{squared_distance, NodeSet};
use crate::error::FitError;

/// Pivot-ratio bound above which the system is refit with regularization.
pub const MAX_CONDITION: f64 = 1e10;
pub const INITIAL_REGULARIZATION: f64 = 1e-10;
pub const MAX_REGULARIZATION: f64 = 1e-6;

const MULTIQUADRIC_SHAPE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    ThinPlateSpline,
    Cubic,
    Linear,
    Multiquadric,
    Gaussian,
}

impl Kernel {
    /// `φ(r)`. Panics on negative `r`.
    pub fn value(self, r: f64) -> f64 {
        assert!(r >= 0.0, "kernel evaluated at negative radius {r}");
        self.value_sq(r * r)
    }

    /// `φ` as a function of the squared radius, avoiding a square root where possible.
    #[inline]
    pub(crate) fn value_sq(self, r2: f64) -> f64 {
        match self {
            Kernel::ThinPlateSpline => {
                if r2 == 0.0 {
                    0.0
                } else {
                    0.5 * r2 * r2.ln()
                }
            }
            Kernel::Cubic => r2 * r2.sqrt(),
            Kernel::Linear => r2.sqrt(),
            Kernel::Multiquadric => (r2 + MULTIQUADRIC_SHAPE * MULTIQUADRIC_SHAPE).sqrt(),
            Kernel::Gaussian => (-r2).exp(),
        }
    }
}

/// A fitted interpolant. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfModel {
    pub kernel: Kernel,
    pub centers: Vec<Vec<f64>>,
    pub radial_coeffs: Vec<f64>,
    /// Linear coefficients followed by the constant term.
    pub poly_coeffs: Vec<f64>,
    pub regularization_used: f64,
}

impl RbfModel {
    pub fn dim(&self) -> usize {
        self.poly_coeffs.len() - 1
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let radial: f64 = self
            .centers
            .iter()
            .zip(&self.radial_coeffs)
            .map(|(c, &l)| l * self.kernel.value_sq(squared_distance(c, x)))
            .sum();
        let tail: f64 = x.iter().zip(&self.poly_coeffs[..n]).map(|(a, b)| a * b).sum();
        radial + tail + self.poly_coeffs[n]
    }
}

/// Fits on every node of the set, temporary ones included.
pub fn fit_nodes(nodes: &NodeSet, kernel: Kernel) -> Result<RbfModel, FitError> {
    fit(nodes.points(), nodes.values(), kernel)
}

/// Fits an interpolant through `(points[i], values[i])`.
pub fn fit(points: &[Vec<f64>], values: &[f64], kernel: Kernel) -> Result<RbfModel, FitError> {
    let k = points.len();
    let n = points.first().map_or(0, Vec::len);
    if k < n + 1 || n == 0 {
        return Err(FitError::TooFewNodes { min: n + 1, got: k });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(FitError::NonFiniteValue(i));
    }
    for i in 0..k {
        for j in (i + 1)..k {
            if points[i] == points[j] {
                return Err(FitError::DuplicatePoints(i, j));
            }
        }
    }
    if !is_poised(points) {
        return Err(FitError::RankDeficient);
    }

    let m = k + n + 1;
    let mut base = DMatrix::<f64>::zeros(m, m);
    for i in 0..k {
        for j in (i + 1)..k {
            let v = kernel.value_sq(squared_distance(&points[i], &points[j]));
            base[(i, j)] = v;
            base[(j, i)] = v;
        }
        base[(i, i)] = kernel.value_sq(0.0);
        for d in 0..n {
            base[(i, k + d)] = points[i][d];
            base[(k + d, i)] = points[i][d];
        }
        base[(i, k + n)] = 1.0;
        base[(k + n, i)] = 1.0;
    }
    debug_assert!(is_symmetric(&base));
    let mut rhs = DVector::<f64>::zeros(m);
    rhs.rows_mut(0, k).copy_from_slice(values);

    let mut regularization = 0.0;
    loop {
        let mut a = base.clone();
        for i in 0..k {
            a[(i, i)] += regularization;
        }
        if let Some(sol) = solve_checked(a, &rhs) {
            return Ok(RbfModel {
                kernel,
                centers: points.to_vec(),
                radial_coeffs: sol.rows(0, k).iter().copied().collect(),
                poly_coeffs: sol.rows(k, n + 1).iter().copied().collect(),
                regularization_used: regularization,
            });
        }
        regularization = if regularization == 0.0 {
            INITIAL_REGULARIZATION
        } else {
            regularization * 2.0
        };
        if regularization > MAX_REGULARIZATION {
            return Err(FitError::IllConditioned(regularization / 2.0));
        }
    }
}

fn is_symmetric(a: &DMatrix<f64>) -> bool {
    (0..a.nrows()).all(|i| (0..i).all(|j| a[(i, j)] == a[(j, i)]))
}

/// LU solve that refuses singular or badly conditioned systems.
///
/// The condition estimate is the ratio of the largest to the smallest
/// pivot magnitude of the factorization.
fn solve_checked(a: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..u.nrows() {
        let p = u[(i, i)].abs();
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return None;
    }
    let sol = lu.solve(rhs)?;
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

/// Assembles `Φ` for inspection; used by property tests on symmetry.
pub fn kernel_matrix(points: &[Vec<f64>], kernel: Kernel) -> DMatrix<f64> {
    let k = points.len();
    DMatrix::from_fn(k, k, |i, j| kernel.value_sq(squared_distance(&points[i], &points[j])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;

    #[test]
    fn kernel_values() {
        let tps = Kernel::ThinPlateSpline;
        assert_eq!(tps.value(1.0), 0.0);
        assert_eq!(tps.value(0.0), 0.0);
        let e = std::f64::consts::E;
        assert!((tps.value(e) - 7.389_056_098_9).abs() < 1e-9);
        assert_eq!(Kernel::Cubic.value(2.0), 8.0);
        assert_eq!(Kernel::Linear.value(2.0), 2.0);
        assert!((Kernel::Multiquadric.value(0.0) - 1.0).abs() < 1e-15);
        assert!((Kernel::Gaussian.value(1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    #[should_panic]
    fn kernel_rejects_negative_radius() {
        Kernel::ThinPlateSpline.value(-0.1);
    }

    /// Gauss-Jordan elimination with partial pivoting on the saddle system,
    /// written independently of the nalgebra path.
    fn oracle_solve(points: &[Vec<f64>], values: &[f64]) -> Vec<f64> {
        let k = points.len();
        let n = points[0].len();
        let m = k + n + 1;
        let phi = |r: f64| if r == 0.0 { 0.0 } else { r * r * r.ln() };
        let mut a = vec![vec![0.0; m + 1]; m];
        for i in 0..k {
            for j in 0..k {
                let r = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt();
                a[i][j] = phi(r);
            }
            for d in 0..n {
                a[i][k + d] = points[i][d];
                a[k + d][i] = points[i][d];
            }
            a[i][k + n] = 1.0;
            a[k + n][i] = 1.0;
            a[i][m] = values[i];
        }
        for col in 0..m {
            let piv = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
            a.swap(col, piv);
            for row in 0..m {
                if row != col {
                    let f = a[row][col] / a[col][col];
                    for c in col..=m {
                        a[row][c] -= f * a[col][c];
                    }
                }
            }
        }
        (0..m).map(|i| a[i][m] / a[i][i]).collect()
    }

    #[test]
    fn two_point_linear_reproduction() {
        let pts = vec![vec![0.0], vec![1.0]];
        let vals = [0.0, 1.0];
        let oracle = oracle_solve(&pts, &vals);
        // λ = 0, slope 1, intercept 0
        assert!(oracle[0].abs() < 1e-12 && oracle[1].abs() < 1e-12);
        assert!((oracle[2] - 1.0).abs() < 1e-12 && oracle[3].abs() < 1e-12);

        let model = fit(&pts, &vals, Kernel::ThinPlateSpline).unwrap();
        assert!((model.predict(&[0.5]) - 0.5).abs() < 1e-12);
        assert!(model.radial_coeffs.iter().all(|l| l.abs() < 1e-12));
    }

    #[test]
    fn matches_oracle_on_scattered_data() {
        let pts = vec![vec![0.1, 0.2], vec![0.9, 0.3], vec![0.4, 0.8], vec![0.5, 0.5], vec![0.0, 1.0]];
        let vals = [1.0, -2.0, 0.5, 3.0, 0.0];
        let oracle = oracle_solve(&pts, &vals);
        let model = fit(&pts, &vals, Kernel::ThinPlateSpline).unwrap();
        let ours: Vec<f64> = model.radial_coeffs.iter().chain(&model.poly_coeffs).copied().collect();
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn interpolates_at_a_node() {
        let pts = vec![vec![0.0], vec![0.5], vec![1.0]];
        let model = fit(&pts, &[0.0, -1.0, 0.0], Kernel::ThinPlateSpline).unwrap();
        assert!((model.predict(&[0.5]) + 1.0).abs() < 1e-9);
        assert_eq!(model.regularization_used, 0.0);
    }

    #[test]
    fn affine_data_has_zero_radial_part() {
        let mut rng = RngStream::new(5, "test").rng();
        let a = [1.5, -0.7, 2.0];
        let b = 0.3;
        let f = |x: &[f64]| x.iter().zip(&a).map(|(x, a)| x * a).sum::<f64>() + b;
        let pts: Vec<Vec<f64>> = (0..12).map(|_| (0..3).map(|_| rng.random()).collect()).collect();
        let vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
        let model = fit(&pts, &vals, Kernel::ThinPlateSpline).unwrap();
        assert!(model.radial_coeffs.iter().all(|l| l.abs() < 1e-8));
        for (c, e) in model.poly_coeffs.iter().zip(a.iter().chain([&b])) {
            assert!((c - e).abs() < 1e-8);
        }
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            assert!((model.predict(&x) - f(&x)).abs() <= 1e-6 * f(&x).abs().max(1.0));
        }
    }

    #[test]
    fn duplicate_points_rejected() {
        let pts = vec![vec![0.1, 0.1], vec![0.5, 0.9], vec![0.1, 0.1], vec![0.9, 0.2]];
        assert_eq!(
            fit(&pts, &[0.0; 4], Kernel::ThinPlateSpline).unwrap_err(),
            FitError::DuplicatePoints(0, 2)
        );
    }

    #[test]
    fn collinear_points_rejected() {
        let pts = vec![vec![0.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0]];
        assert_eq!(fit(&pts, &[0.0; 3], Kernel::ThinPlateSpline).unwrap_err(), FitError::RankDeficient);
    }

    #[test]
    fn near_duplicates_fall_back_to_regularization() {
        let mut pts: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        pts.push(vec![0.5, 0.5]);
        pts.push(vec![0.5 + 1e-12, 0.5]);
        let vals = [0.0, 1.0, 1.0, 2.0, 5.0, 5.0 + 1e-3];
        match fit(&pts, &vals, Kernel::ThinPlateSpline) {
            Ok(m) => assert!(m.regularization_used > 0.0),
            Err(e) => assert!(matches!(e, FitError::IllConditioned(_))),
        }
    }

    #[test]
    fn orthogonality_side_conditions() {
        let mut rng = RngStream::new(9, "test").rng();
        let pts: Vec<Vec<f64>> = (0..20).map(|_| (0..4).map(|_| rng.random()).collect()).collect();
        let vals: Vec<f64> = (0..20).map(|_| rng.random_range(-5.0..5.0)).collect();
        let model = fit(&pts, &vals, Kernel::ThinPlateSpline).unwrap();
        for d in 0..=4 {
            let s: f64 = model
                .radial_coeffs
                .iter()
                .zip(&pts)
                .map(|(l, p)| l * if d < 4 { p[d] } else { 1.0 })
                .sum();
            assert!(s.abs() < 1e-6);
        }
    }

    #[test]
    fn other_kernels_interpolate() {
        let pts = vec![vec![0.1, 0.2], vec![0.9, 0.3], vec![0.4, 0.8], vec![0.5, 0.5], vec![0.0, 1.0]];
        let vals = [1.0, -2.0, 0.5, 3.0, 0.0];
        for kernel in [Kernel::Cubic, Kernel::Linear, Kernel::Multiquadric, Kernel::Gaussian] {
            let model = fit(&pts, &vals, kernel).unwrap();
            for (p, v) in pts.iter().zip(vals) {
                assert!((model.predict(p) - v).abs() < 1e-6, "{kernel:?}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn node_set() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
            (1usize..5).prop_flat_map(|n| {
                (n + 1..n + 15).prop_flat_map(move |k| {
                    (
                        prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), k),
                        prop::collection::vec(-10.0f64..10.0, k),
                    )
                })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn kernel_matrix_symmetric((pts, _) in node_set()) {
                let phi = kernel_matrix(&pts, Kernel::ThinPlateSpline);
                prop_assert_eq!(phi.clone(), phi.transpose());
            }

            #[test]
            fn order_invariant((pts, vals) in node_set(), probes in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 20)) {
                let Ok(a) = fit(&pts, &vals, Kernel::ThinPlateSpline) else { return Ok(()); };
                let rev_pts: Vec<_> = pts.iter().rev().cloned().collect();
                let rev_vals: Vec<_> = vals.iter().rev().copied().collect();
                let b = fit(&rev_pts, &rev_vals, Kernel::ThinPlateSpline).unwrap();
                prop_assume!(a.regularization_used == 0.0 && b.regularization_used == 0.0);
                let n = pts[0].len();
                for p in probes {
                    let x = &p[..n];
                    let (pa, pb) = (a.predict(x), b.predict(x));
                    prop_assert!((pa - pb).abs() <= 1e-9 * pa.abs().max(1.0), "{} vs {}", pa, pb);
                }
            }

            #[test]
            fn interpolation_residual((pts, vals) in node_set()) {
                let Ok(model) = fit(&pts, &vals, Kernel::ThinPlateSpline) else { return Ok(()); };
                prop_assume!(model.regularization_used == 0.0);
                let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for (p, v) in pts.iter().zip(&vals) {
                    prop_assert!((model.predict(p) - v).abs() <= 1e-6 * scale);
                }
            }
        }
    }
}
