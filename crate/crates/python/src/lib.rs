//! Python module `pyrbfsearch`.

use std::time::Duration;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rbfsearch::design::latin_hypercube as lhs;
use rbfsearch::hpo::HpoSpace;
use rbfsearch::io::random_search::random_search as rs;
use rbfsearch::io::stats;
use rbfsearch::surrogate::{fit, Kernel, RbfModel};
use rbfsearch::{
    best_so_far_trace, run_parallel, BoxDomain, Budget, EngineConfig, Error, EvalError, Objective, ObjectiveSense,
    OptimizationResult, RngStream,
};

fn to_py_err(e: impl Into<Error>) -> PyErr {
    match e.into() {
        e @ (Error::Config(_) | Error::Domain(_) | Error::Design(_) | Error::Fit(_)) => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A Python callable taking a list of floats and returning a float.
/// Exceptions and non-float results count as failed evaluations.
struct PyObjective(Py<PyAny>);

impl Objective for PyObjective {
    fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        Python::attach(|py| {
            self.0
                .call1(py, (x.to_vec(),))
                .and_then(|v| v.extract::<f64>(py).map_err(PyErr::from))
                .map_err(|e| EvalError::Reported(e.to_string()))
        })
    }
}

fn sense(maximize: bool) -> ObjectiveSense {
    if maximize {
        ObjectiveSense::Maximize
    } else {
        ObjectiveSense::Minimize
    }
}

fn domain(lower: Vec<f64>, upper: Vec<f64>, integer_dims: Option<Vec<usize>>) -> PyResult<BoxDomain> {
    BoxDomain::new(lower, upper, integer_dims.unwrap_or_default()).map_err(to_py_err)
}

fn budget(max_evals: Option<usize>, max_seconds: Option<f64>, target: Option<f64>) -> PyResult<Budget> {
    let max_wallclock = match max_seconds {
        Some(s) if !(s.is_finite() && s > 0.0) => return Err(PyValueError::new_err("max_seconds must be positive")),
        s => s.map(Duration::from_secs_f64),
    };
    Ok(Budget { max_evaluations: max_evals, max_wallclock, target_value: target })
}

/// Outcome of an optimization run.
#[pyclass(name = "OptimizationResult", frozen)]
struct PyOptimizationResult {
    inner: OptimizationResult,
}

#[pymethods]
impl PyOptimizationResult {
    #[getter]
    fn best_point(&self) -> Vec<f64> {
        self.inner.best_point.clone()
    }

    #[getter]
    fn best_value(&self) -> f64 {
        self.inner.best_value
    }

    #[getter]
    fn stopped_because(&self) -> String {
        serde_json::to_value(self.inner.stopped_because).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    }

    /// One dict per evaluation, in evaluation order. Values are in the
    /// caller's sense.
    #[getter]
    fn evaluations<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .evaluations
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("seq", r.sequence_id)?;
                d.set_item("point", r.point.clone())?;
                d.set_item("value", self.inner.sense.to_user(r.value))?;
                d.set_item("failed", r.failed)?;
                d.set_item("weight", r.weight_used)?;
                d.set_item("worker", r.worker)?;
                d.set_item("t_wall_ms", r.t_wall_ms)?;
                Ok(d)
            })
            .collect()
    }

    /// Best value after each evaluation.
    fn trace(&self) -> Vec<f64> {
        best_so_far_trace(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.evaluations.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "OptimizationResult(best_value={}, evaluations={}, stopped_because='{}')",
            self.inner.best_value,
            self.inner.evaluations.len(),
            self.stopped_because()
        )
    }
}

/// Minimize (or maximize) `objective` over the box `[lower, upper]`.
#[pyfunction]
#[pyo3(signature = (objective, lower, upper, *, integer_dims=None, max_evals=None, max_seconds=None, target=None, maximize=false, seed=0, workers=1))]
#[allow(clippy::too_many_arguments)]
fn optimize(
    py: Python<'_>,
    objective: Py<PyAny>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    integer_dims: Option<Vec<usize>>,
    max_evals: Option<usize>,
    max_seconds: Option<f64>,
    target: Option<f64>,
    maximize: bool,
    seed: u64,
    workers: usize,
) -> PyResult<PyOptimizationResult> {
    let d = domain(lower, upper, integer_dims)?;
    let b = budget(max_evals, max_seconds, target)?;
    let f = PyObjective(objective);
    let config = EngineConfig::default();
    let inner = py
        .detach(|| {
            if workers == 1 {
                rbfsearch::optimize(&f, &d, sense(maximize), &b, &config, seed)
            } else {
                run_parallel(&f, &d, sense(maximize), &b, &config, workers, seed).map(|r| r.result)
            }
        })
        .map_err(to_py_err)?;
    Ok(PyOptimizationResult { inner })
}

/// Uniform random search over the box, for comparison.
#[pyfunction]
#[pyo3(signature = (objective, lower, upper, max_evals, *, integer_dims=None, maximize=false, seed=0))]
#[allow(clippy::too_many_arguments)]
fn random_search(
    py: Python<'_>,
    objective: Py<PyAny>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    max_evals: usize,
    integer_dims: Option<Vec<usize>>,
    maximize: bool,
    seed: u64,
) -> PyResult<PyOptimizationResult> {
    let d = domain(lower, upper, integer_dims)?;
    let f = PyObjective(objective);
    let stream = RngStream::new(seed, "random_search");
    let inner = py
        .detach(|| rs(&f, &d, sense(maximize), &Budget::evaluations(max_evals), &stream))
        .map_err(to_py_err)?;
    Ok(PyOptimizationResult { inner })
}

/// Randomized Latin hypercube design of `k` points.
#[pyfunction]
#[pyo3(signature = (lower, upper, k, seed=0, integer_dims=None))]
fn latin_hypercube(lower: Vec<f64>, upper: Vec<f64>, k: usize, seed: u64, integer_dims: Option<Vec<usize>>) -> PyResult<Vec<Vec<f64>>> {
    let d = domain(lower, upper, integer_dims)?;
    lhs(&d, k, &RngStream::new(seed, "design")).map(|design| design.points).map_err(to_py_err)
}

/// Radial basis function interpolant.
#[pyclass(name = "RbfModel", frozen)]
struct PyRbfModel {
    inner: RbfModel,
}

#[pymethods]
impl PyRbfModel {
    fn predict(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!("expected {} coordinates, got {}", self.inner.dim(), x.len())));
        }
        Ok(self.inner.predict(&x))
    }

    #[getter]
    fn regularization(&self) -> f64 {
        self.inner.regularization_used
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }
}

/// Fit an interpolant through `points` and `values`. `kernel` is one of
/// thin_plate_spline, cubic, linear, multiquadric, gaussian.
#[pyfunction]
#[pyo3(signature = (points, values, kernel="thin_plate_spline"))]
fn fit_rbf(points: Vec<Vec<f64>>, values: Vec<f64>, kernel: &str) -> PyResult<PyRbfModel> {
    if points.len() != values.len() || points.iter().any(|p| p.len() != points[0].len()) {
        return Err(PyValueError::new_err("points must be a rectangular list matching values"));
    }
    let kernel: Kernel = serde_json::from_value(serde_json::Value::String(kernel.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown kernel '{kernel}'")))?;
    fit(&points, &values, kernel).map(|inner| PyRbfModel { inner }).map_err(to_py_err)
}

/// Hyperparameter space, built from the same JSON/TOML structure as the
/// `[space]` section of a run configuration.
#[pyclass(name = "HpoSpace", frozen)]
struct PyHpoSpace {
    inner: HpoSpace,
}

#[pymethods]
impl PyHpoSpace {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: HpoSpace = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `(lower, upper, integer_dims)` of the encoded box.
    fn bounds(&self) -> PyResult<(Vec<f64>, Vec<f64>, Vec<usize>)> {
        let d = self.inner.to_domain().map_err(to_py_err)?;
        Ok((d.lower().to_vec(), d.upper().to_vec(), d.integer_dims().to_vec()))
    }

    fn decode<'py>(&self, py: Python<'py>, point: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        let config = self.inner.decode(&point).map_err(to_py_err)?;
        let text = serde_json::to_string(&config).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        py.import("json")?.call_method1("loads", (text,))
    }

    fn expected_decoded_cost(&self, samples: usize, seed: u64) -> PyResult<f64> {
        self.inner.expected_decoded_cost(samples, &RngStream::new(seed, "cost")).map_err(to_py_err)
    }
}

/// Friedman statistic and 95% significance for a runs × algorithms rank table.
#[pyfunction]
fn friedman(ranks: Vec<Vec<f64>>) -> PyResult<(f64, bool)> {
    stats::friedman(&ranks).map(|r| (r.statistic, r.significant_95)).map_err(to_py_err)
}

/// Within-run average ranks (1 = best).
#[pyfunction]
#[pyo3(signature = (values, maximize=false))]
fn rank_rows(values: Vec<Vec<f64>>, maximize: bool) -> Vec<Vec<f64>> {
    stats::rank_rows(&values, sense(maximize))
}

#[pyfunction]
#[pyo3(signature = (values, maximize=false))]
fn count_better_matrix(values: Vec<Vec<f64>>, maximize: bool) -> PyResult<Vec<Vec<usize>>> {
    if values.iter().any(|r| r.len() != values[0].len()) {
        return Err(PyValueError::new_err("values must be rectangular"));
    }
    Ok(stats::count_better_matrix(&values, sense(maximize)))
}

#[pymodule]
fn pyrbfsearch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOptimizationResult>()?;
    m.add_class::<PyRbfModel>()?;
    m.add_class::<PyHpoSpace>()?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(random_search, m)?)?;
    m.add_function(wrap_pyfunction!(latin_hypercube, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rbf, m)?)?;
    m.add_function(wrap_pyfunction!(friedman, m)?)?;
    m.add_function(wrap_pyfunction!(rank_rows, m)?)?;
    m.add_function(wrap_pyfunction!(count_better_matrix, m)?)?;
    Ok(())
}
