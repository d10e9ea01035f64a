//! Python bindings for `choreo2c`.
//!
//! Loops are exposed as the `FourierPath` class; reports come back as plain
//! dicts built from the library's serialized form.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

use choreo2c::action::QuadratureSpec;
use choreo2c::minimize::{self as descent, MinimizeOptions, MinimizeReport};
use choreo2c::trajectory::PathJson;
use choreo2c::verify::{self, Suite};
use choreo2c::{analytic, Error, Point};

create_exception!(
    pychoreo2c,
    ChoreoError,
    PyException,
    "Base class of library errors."
);
create_exception!(
    pychoreo2c,
    DomainError,
    ChoreoError,
    "Argument outside the operation's domain."
);
create_exception!(
    pychoreo2c,
    CollisionError,
    ChoreoError,
    "A separation fell below the collision floor."
);
create_exception!(
    pychoreo2c,
    ConvergenceError,
    ChoreoError,
    "A solver stalled or ran out of budget."
);

fn to_py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Domain(_) => DomainError::new_err(msg),
        Error::Collision { .. } => CollisionError::new_err(msg),
        Error::Convergence { .. } | Error::Stalled { .. } | Error::AllStartsFailed { .. } => {
            ConvergenceError::new_err(msg)
        }
        _ => ChoreoError::new_err(msg),
    }
}

trait IntoPyResult<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for choreo2c::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

fn value_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let items = items
                .iter()
                .map(|x| value_to_py(py, x))
                .collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, x) in map {
                dict.set_item(k, value_to_py(py, x)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| ChoreoError::new_err(e.to_string()))?;
    value_to_py(py, &v)
}

#[pyclass(name = "ProblemParams", module = "pychoreo2c", frozen)]
struct PyParams {
    inner: choreo2c::ProblemParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (alpha = 1.0, beta = 1.0, m = 1.0, big_m = 1.0, n = 3))]
    fn new(alpha: f64, beta: f64, m: f64, big_m: f64, n: usize) -> PyResult<Self> {
        let inner = choreo2c::ProblemParams::new(alpha, beta, m, big_m, n)
            .validate()
            .py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn m(&self) -> f64 {
        self.inner.m
    }

    #[getter]
    fn big_m(&self) -> f64 {
        self.inner.big_m
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ProblemParams(alpha={}, beta={}, m={}, big_m={}, n={})",
            p.alpha, p.beta, p.m, p.big_m, p.n
        )
    }
}

#[pyclass(name = "FourierPath", module = "pychoreo2c", frozen)]
struct PyPath {
    inner: choreo2c::FourierPath,
}

fn point(v: [f64; 3]) -> Point {
    Point::new(v[0], v[1], v[2])
}

#[pymethods]
impl PyPath {
    /// Coefficients `a_0..=a_K` and `b_1..=b_K` as lists of 3-vectors.
    #[new]
    fn new(cos: Vec<[f64; 3]>, sin: Vec<[f64; 3]>) -> PyResult<Self> {
        let inner = choreo2c::FourierPath::from_coeffs(
            cos.into_iter().map(point).collect(),
            sin.into_iter().map(point).collect(),
        )
        .py()?;
        Ok(Self { inner })
    }

    /// Uniform circle of the given radius in the yoz-plane.
    #[staticmethod]
    #[pyo3(signature = (order, radius, phase = 0.0))]
    fn circle(order: usize, radius: f64, phase: f64) -> PyResult<Self> {
        if order == 0 {
            return Err(DomainError::new_err("order must be at least 1"));
        }
        Ok(Self {
            inner: choreo2c::FourierPath::circle(order, radius, phase).py()?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let json: PathJson =
            serde_json::from_str(text).map_err(|e| DomainError::new_err(e.to_string()))?;
        Ok(Self {
            inner: choreo2c::FourierPath::from_json(&json).py()?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.to_json())
            .map_err(|e| ChoreoError::new_err(e.to_string()))
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    fn evaluate(&self, t: f64) -> [f64; 3] {
        self.inner.evaluate(t).into()
    }

    fn cos_coeff(&self, k: usize) -> PyResult<[f64; 3]> {
        if k > self.inner.order() {
            return Err(DomainError::new_err("harmonic index above the order"));
        }
        Ok(self.inner.cos_coeff(k).into())
    }

    fn sin_coeff(&self, k: usize) -> PyResult<[f64; 3]> {
        if k == 0 || k > self.inner.order() {
            return Err(DomainError::new_err("harmonic index outside 1..=order"));
        }
        Ok(self.inner.sin_coeff(k).into())
    }

    fn shift(&self, theta: f64) -> Self {
        Self {
            inner: self.inner.shift(theta),
        }
    }

    /// Flattened coefficients: `a_0`, then `a_k, b_k` for each `k`.
    fn to_vec(&self) -> Vec<f64> {
        self.inner.to_vec()
    }

    fn kinetic_integral(&self) -> f64 {
        self.inner.kinetic_integral()
    }

    fn __repr__(&self) -> String {
        format!("FourierPath(order={})", self.inner.order())
    }
}

#[pyclass(name = "MinimizeResult", module = "pychoreo2c", frozen)]
struct PyMinimizeResult {
    inner: MinimizeReport,
}

#[pymethods]
impl PyMinimizeResult {
    #[getter]
    fn path(&self) -> PyPath {
        PyPath {
            inner: self.inner.path.clone(),
        }
    }

    #[getter]
    fn action(&self) -> f64 {
        self.inner.action.total
    }

    #[getter]
    fn grad_norm(&self) -> f64 {
        self.inner.grad_norm
    }

    #[getter]
    fn iters(&self) -> usize {
        self.inner.iters
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn min_sep(&self) -> f64 {
        self.inner.min_sep
    }

    /// Full report, including the per-iteration trace.
    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner)
    }
}

fn quad(nodes: usize) -> PyResult<QuadratureSpec> {
    QuadratureSpec::new(nodes).py()
}

#[pyfunction]
#[pyo3(signature = (params, tol = analytic::DEFAULT_TOL))]
fn predict<'py>(py: Python<'py>, params: &PyParams, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &analytic::predict(&params.inner, tol).py()?)
}

#[pyfunction]
#[pyo3(signature = (params, tol = analytic::DEFAULT_TOL))]
fn solve_lambda<'py>(py: Python<'py>, params: &PyParams, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &analytic::solve_lambda(&params.inner, tol).py()?)
}

#[pyfunction]
fn force_balance_residual(radius: f64, params: &PyParams) -> f64 {
    analytic::force_balance_residual(radius, &params.inner)
}

#[pyfunction]
#[pyo3(signature = (params, masses, tol = analytic::DEFAULT_TOL))]
fn radius_sweep<'py>(
    py: Python<'py>,
    params: &PyParams,
    masses: Vec<f64>,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(
        py,
        &analytic::radius_sweep(&params.inner, &masses, tol).py()?,
    )
}

#[pyfunction]
fn action_lower_bound(params: &PyParams) -> PyResult<f64> {
    let report = analytic::solve_lambda(&params.inner, analytic::DEFAULT_TOL).py()?;
    analytic::lower_bound_at(&params.inner, &report).py()
}

#[pyfunction]
#[pyo3(signature = (path, params, nodes = 512))]
fn action_reduced<'py>(
    py: Python<'py>,
    path: &PyPath,
    params: &PyParams,
    nodes: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let a = choreo2c::action_reduced(&path.inner, &params.inner, &quad(nodes)?).py()?;
    to_dict(py, &a)
}

#[pyfunction]
#[pyo3(signature = (path, params, nodes = 512))]
fn action_gradient(path: &PyPath, params: &PyParams, nodes: usize) -> PyResult<PyPath> {
    let g = choreo2c::action_gradient(&path.inner, &params.inner, &quad(nodes)?).py()?;
    Ok(PyPath { inner: g })
}

fn options(
    order: usize,
    nodes: usize,
    tol: f64,
    max_iters: usize,
    antiperiodic: bool,
    seed: u64,
) -> PyResult<MinimizeOptions> {
    Ok(MinimizeOptions {
        order,
        quad: quad(nodes)?,
        grad_tol: tol,
        max_iters,
        use_antiperiodic: antiperiodic,
        seed,
        ..Default::default()
    })
}

#[allow(clippy::too_many_arguments)]
#[pyfunction]
#[pyo3(signature = (start, params, order = 16, nodes = 512, tol = 1e-8, max_iters = 5000, antiperiodic = false))]
fn minimize(
    py: Python<'_>,
    start: &PyPath,
    params: &PyParams,
    order: usize,
    nodes: usize,
    tol: f64,
    max_iters: usize,
    antiperiodic: bool,
) -> PyResult<PyMinimizeResult> {
    let opts = options(order, nodes, tol, max_iters, antiperiodic, 0)?;
    let (start, p) = (start.inner.clone(), params.inner);
    let inner = py
        .detach(move || descent::minimize(&start, &p, &opts))
        .py()?;
    Ok(PyMinimizeResult { inner })
}

/// Returns `(best, best_seed, final_actions)`.
#[allow(clippy::too_many_arguments)]
#[pyfunction]
#[pyo3(signature = (params, starts = 8, seed = 0, order = 16, nodes = 512, tol = 1e-8, max_iters = 5000, antiperiodic = false))]
fn multistart(
    py: Python<'_>,
    params: &PyParams,
    starts: usize,
    seed: u64,
    order: usize,
    nodes: usize,
    tol: f64,
    max_iters: usize,
    antiperiodic: bool,
) -> PyResult<(PyMinimizeResult, u64, Vec<f64>)> {
    let opts = options(order, nodes, tol, max_iters, antiperiodic, seed)?;
    let p = params.inner;
    let run = py
        .detach(move || descent::multistart(&p, &opts, starts))
        .py()?;
    Ok((
        PyMinimizeResult { inner: run.best },
        run.best_seed,
        run.final_actions,
    ))
}

#[pyfunction]
fn check_pw<'py>(py: Python<'py>, path: &PyPath, theta: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &verify::check_pw(&path.inner, theta).py()?)
}

#[pyfunction]
fn check_weighted<'py>(
    py: Python<'py>,
    path: &PyPath,
    n: usize,
    alpha: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &verify::check_weighted(&path.inner, n, alpha).py()?)
}

#[pyfunction]
fn check_jensen<'py>(
    py: Python<'py>,
    path: &PyPath,
    theta: f64,
    exponent: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(
        py,
        &verify::check_jensen(&path.inner, theta, exponent).py()?,
    )
}

#[pyfunction]
fn pw_averaging_check<'py>(py: Python<'py>, path: &PyPath) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &verify::pw_averaging_check(&path.inner))
}

#[pyfunction]
fn constant_chord_implies_circle<'py>(
    py: Python<'py>,
    path: &PyPath,
    theta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(
        py,
        &verify::constant_chord_implies_circle(&path.inner, theta).py()?,
    )
}

#[pyfunction]
fn ode_residual(path: &PyPath, params: &PyParams) -> PyResult<f64> {
    verify::ode_residual(&path.inner, &params.inner).py()
}

#[pyfunction]
fn circle_fit<'py>(py: Python<'py>, path: &PyPath) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &verify::circle_fit(&path.inner).py()?)
}

/// `suite` is one of `"inequalities"`, `"ode"`, `"chain"`.
#[pyfunction]
#[pyo3(signature = (suite, paths = 1000, seed = 0))]
fn run_campaign<'py>(
    py: Python<'py>,
    suite: &str,
    paths: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let suite: Suite = serde_json::from_value(Value::String(suite.to_owned()))
        .map_err(|_| DomainError::new_err(format!("unknown suite {suite:?}")))?;
    let summary = py.detach(move || verify::run_campaign(suite, paths, seed));
    to_dict(py, &summary)
}

#[pymodule]
fn pychoreo2c(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("ChoreoError", py.get_type::<ChoreoError>())?;
    m.add("DomainError", py.get_type::<DomainError>())?;
    m.add("CollisionError", py.get_type::<CollisionError>())?;
    m.add("ConvergenceError", py.get_type::<ConvergenceError>())?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyPath>()?;
    m.add_class::<PyMinimizeResult>()?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(force_balance_residual, m)?)?;
    m.add_function(wrap_pyfunction!(radius_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(action_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(action_reduced, m)?)?;
    m.add_function(wrap_pyfunction!(action_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(multistart, m)?)?;
    m.add_function(wrap_pyfunction!(check_pw, m)?)?;
    m.add_function(wrap_pyfunction!(check_weighted, m)?)?;
    m.add_function(wrap_pyfunction!(check_jensen, m)?)?;
    m.add_function(wrap_pyfunction!(pw_averaging_check, m)?)?;
    m.add_function(wrap_pyfunction!(constant_chord_implies_circle, m)?)?;
    m.add_function(wrap_pyfunction!(ode_residual, m)?)?;
    m.add_function(wrap_pyfunction!(circle_fit, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    Ok(())
}
