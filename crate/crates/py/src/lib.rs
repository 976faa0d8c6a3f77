//! Python bindings. The extension module is named `lattice_series`.

use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use lattice_series::error::Error;
use lattice_series::identity::{self, IdentityId, IdentityReport, IdentitySuite, Side};
use lattice_series::reps::{self, FormCoeffs, RepCache};
use lattice_series::series::{self, EvalResult, SeriesParams, TruncationPolicy};

create_exception!(lattice_series, LatticeSeriesError, PyException);
create_exception!(lattice_series, NotConvergedError, LatticeSeriesError);
create_exception!(lattice_series, CapacityError, LatticeSeriesError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::InvalidInput(_) => PyValueError::new_err(e.to_string()),
        Error::NotConverged { .. } => NotConvergedError::new_err(e.to_string()),
        Error::Capacity { .. } => CapacityError::new_err(e.to_string()),
        Error::Cache { .. } | Error::Io(_) => PyOSError::new_err(e.to_string()),
    }
}

fn coeffs(a: u64, b: u64) -> PyResult<FormCoeffs> {
    FormCoeffs::new(a, b).map_err(to_py)
}

#[pyclass(name = "Policy", frozen)]
struct PyPolicy {
    inner: TruncationPolicy,
}

#[pymethods]
impl PyPolicy {
    #[new]
    #[pyo3(signature = (eps_target = 1e-12, n_cap = None, r_cap = None, accel = true))]
    fn new(eps_target: f64, n_cap: Option<u64>, r_cap: Option<u64>, accel: bool) -> PyResult<Self> {
        let mut inner = TruncationPolicy::with_eps(eps_target);
        if let Some(n) = n_cap {
            inner.n_cap = n;
        }
        if let Some(r) = r_cap {
            inner.r_cap = r;
        }
        inner.accel = accel;
        inner.validate().map_err(to_py)?;
        Ok(PyPolicy { inner })
    }

    #[getter]
    fn eps_target(&self) -> f64 {
        self.inner.eps_target
    }

    #[getter]
    fn n_cap(&self) -> u64 {
        self.inner.n_cap
    }

    #[getter]
    fn r_cap(&self) -> u64 {
        self.inner.r_cap
    }

    #[getter]
    fn accel(&self) -> bool {
        self.inner.accel
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "Policy(eps_target={:e}, n_cap={}, r_cap={}, accel={})",
            p.eps_target,
            p.n_cap,
            p.r_cap,
            if p.accel { "True" } else { "False" }
        )
    }
}

fn policy_of(p: Option<PyRef<'_, PyPolicy>>) -> TruncationPolicy {
    p.map(|p| p.inner).unwrap_or_default()
}

/// Value of a truncated series together with its error budget.
#[pyclass(name = "EvalResult", frozen)]
struct PyEvalResult {
    inner: EvalResult,
}

#[pymethods]
impl PyEvalResult {
    #[getter]
    fn value(&self) -> Complex64 {
        self.inner.value
    }

    #[getter]
    fn truncation(&self) -> f64 {
        self.inner.budget.truncation
    }

    #[getter]
    fn rounding(&self) -> f64 {
        self.inner.budget.rounding
    }

    #[getter]
    fn budget(&self) -> f64 {
        self.inner.budget.total
    }

    #[getter]
    fn n_used(&self) -> u64 {
        self.inner.n_used
    }

    #[getter]
    fn r_used(&self) -> u64 {
        self.inner.r_used
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    fn __repr__(&self) -> String {
        format!("EvalResult(value={}, budget={:e})", self.inner.value, self.inner.budget.total)
    }
}

fn wrap(r: lattice_series::error::Result<EvalResult>) -> PyResult<PyEvalResult> {
    r.map(|inner| PyEvalResult { inner }).map_err(to_py)
}

/// `f(x, y; w)`.
#[pyfunction]
#[pyo3(signature = (x, y, w = Complex64::new(0.0, 0.0), policy = None))]
fn eval_f(py: Python<'_>, x: Complex64, y: Complex64, w: Complex64, policy: Option<PyRef<'_, PyPolicy>>) -> PyResult<PyEvalResult> {
    let pol = policy_of(policy);
    wrap(py.detach(|| series::eval_f(&SeriesParams::new(x, y, w), &pol)))
}

/// One-dimensional series at rate `beta`.
#[pyfunction]
#[pyo3(signature = (x, beta, w = Complex64::new(0.0, 0.0), policy = None))]
fn eval_s1d(py: Python<'_>, x: Complex64, beta: Complex64, w: Complex64, policy: Option<PyRef<'_, PyPolicy>>) -> PyResult<PyEvalResult> {
    let pol = policy_of(policy);
    wrap(py.detach(|| series::eval_s1d(x, beta, w, &pol)))
}

#[pyfunction]
#[pyo3(signature = (x1, x2, w, policy = None))]
fn eval_corr1d(py: Python<'_>, x1: Complex64, x2: Complex64, w: Complex64, policy: Option<PyRef<'_, PyPolicy>>) -> PyResult<PyEvalResult> {
    let pol = policy_of(policy);
    wrap(py.detach(|| series::eval_corr1d(x1, x2, w, &pol)))
}

#[pyfunction]
#[pyo3(signature = (x1, x2, w, policy = None))]
fn eval_corr2d(py: Python<'_>, x1: Complex64, x2: Complex64, w: Complex64, policy: Option<PyRef<'_, PyPolicy>>) -> PyResult<PyEvalResult> {
    let pol = policy_of(policy);
    wrap(py.detach(|| series::eval_corr2d(x1, x2, w, &pol)))
}

#[pyfunction]
#[pyo3(signature = (x1, x2, w, r, policy = None))]
fn eval_bracket21(
    py: Python<'_>,
    x1: Complex64,
    x2: Complex64,
    w: Complex64,
    r: u64,
    policy: Option<PyRef<'_, PyPolicy>>,
) -> PyResult<PyEvalResult> {
    let pol = policy_of(policy);
    wrap(py.detach(|| series::eval_bracket21(x1, x2, w, r, &pol)))
}

/// `f(sqrt(a/b), y; 0)` from the representation counts of `a x^2 + b y^2`.
#[pyfunction]
#[pyo3(signature = (a, b, y, policy = None))]
fn bridge_rep_series(py: Python<'_>, a: u64, b: u64, y: Complex64, policy: Option<PyRef<'_, PyPolicy>>) -> PyResult<PyEvalResult> {
    let pol = policy_of(policy);
    let c = coeffs(a, b)?;
    wrap(py.detach(|| identity::bridge_rep_series(&RepCache::from_env(), c, y, &pol)))
}

/// Number of ordered pairs `x, y >= 1` with `a x^2 + b y^2 = n`.
#[pyfunction]
fn count_reps(a: u64, b: u64, n: u64) -> PyResult<u64> {
    reps::count_reps(coeffs(a, b)?, n).map_err(to_py)
}

/// Counts for `N = 1..=n_max`.
#[pyfunction]
fn sieve_reps(py: Python<'_>, a: u64, b: u64, n_max: u64) -> PyResult<Vec<u32>> {
    let c = coeffs(a, b)?;
    py.detach(|| reps::sieve_reps(c, n_max)).map(|t| t.counts).map_err(to_py)
}

/// Identity tags and their parameter names.
#[pyfunction]
fn identities() -> Vec<(&'static str, Vec<&'static str>)> {
    IdentityId::ALL.iter().map(|id| (id.tag(), id.param_names().to_vec())).collect()
}

#[pyclass(name = "IdentityReport", frozen)]
struct PyReport {
    inner: IdentityReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn id(&self) -> &'static str {
        self.inner.id.tag()
    }

    #[getter]
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for p in &self.inner.params {
            d.set_item(&p.name, p.value)?;
        }
        Ok(d)
    }

    #[getter]
    fn lhs(&self) -> Complex64 {
        self.inner.lhs
    }

    #[getter]
    fn rhs(&self) -> Complex64 {
        self.inner.rhs
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }

    #[getter]
    fn budget(&self) -> f64 {
        self.inner.component_budget.total
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold
    }

    #[getter]
    fn passed(&self) -> bool {
        self.inner.pass
    }

    /// List of dicts with `side`, `name`, `coef`, `value`, `contribution`, `budget`.
    #[getter]
    fn components<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let list = PyList::empty(py);
        for c in &self.inner.components {
            let d = PyDict::new(py);
            d.set_item("side", if c.side == Side::Lhs { "lhs" } else { "rhs" })?;
            d.set_item("name", &c.name)?;
            d.set_item("coef", c.coef)?;
            d.set_item("value", c.value)?;
            d.set_item("contribution", c.contribution)?;
            d.set_item("budget", c.budget.total)?;
            list.append(d)?;
        }
        Ok(list)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        let r = &self.inner;
        format!(
            "IdentityReport(id={}, residual={:e}, threshold={:e}, passed={})",
            r.id,
            r.residual,
            r.threshold,
            if r.pass { "True" } else { "False" }
        )
    }
}

#[pyclass(name = "IdentitySuite", frozen)]
struct PySuite {
    inner: IdentitySuite,
}

#[pymethods]
impl PySuite {
    #[new]
    #[pyo3(signature = (policy = None, tol = identity::DEFAULT_TOL, cache_dir = None))]
    fn new(policy: Option<PyRef<'_, PyPolicy>>, tol: f64, cache_dir: Option<PathBuf>) -> PyResult<Self> {
        let cache = match cache_dir {
            Some(d) => RepCache::with_dir(d),
            None => RepCache::from_env(),
        };
        let inner = IdentitySuite::new(policy_of(policy), tol).map_err(to_py)?.with_cache(Arc::new(cache));
        Ok(PySuite { inner })
    }

    /// Runs `identity` with positional parameter values.
    fn run(&self, py: Python<'_>, identity: &str, values: Vec<Complex64>) -> PyResult<PyReport> {
        let id: IdentityId = identity.parse().map_err(to_py)?;
        let inner = py.detach(|| self.inner.run(id, &values)).map_err(to_py)?;
        Ok(PyReport { inner })
    }

    /// Runs `identity` with keyword parameters, e.g. `verify("EQ25", x1=1.2, x2=0.9)`.
    #[pyo3(signature = (identity, **params))]
    fn verify(&self, py: Python<'_>, identity: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<PyReport> {
        let id: IdentityId = identity.parse().map_err(to_py)?;
        let names = id.param_names();
        if let Some(d) = params {
            for key in d.keys() {
                let key: String = key.extract()?;
                if !names.contains(&key.as_str()) {
                    return Err(PyValueError::new_err(format!("{id} has no parameter '{key}'")));
                }
            }
        }
        let values = names
            .iter()
            .map(|n| {
                params
                    .and_then(|d| d.get_item(n).transpose())
                    .transpose()?
                    .ok_or_else(|| PyValueError::new_err(format!("{id} needs parameter '{n}'")))?
                    .extract::<Complex64>()
            })
            .collect::<PyResult<Vec<_>>>()?;
        self.run(py, identity, values)
    }
}

#[pymodule]
#[pyo3(name = "lattice_series")]
fn lattice_series_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPolicy>()?;
    m.add_class::<PyEvalResult>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PySuite>()?;
    m.add_function(wrap_pyfunction!(eval_f, m)?)?;
    m.add_function(wrap_pyfunction!(eval_s1d, m)?)?;
    m.add_function(wrap_pyfunction!(eval_corr1d, m)?)?;
    m.add_function(wrap_pyfunction!(eval_corr2d, m)?)?;
    m.add_function(wrap_pyfunction!(eval_bracket21, m)?)?;
    m.add_function(wrap_pyfunction!(bridge_rep_series, m)?)?;
    m.add_function(wrap_pyfunction!(count_reps, m)?)?;
    m.add_function(wrap_pyfunction!(sieve_reps, m)?)?;
    m.add_function(wrap_pyfunction!(identities, m)?)?;
    let py = m.py();
    m.add("LatticeSeriesError", py.get_type::<LatticeSeriesError>())?;
    m.add("NotConvergedError", py.get_type::<NotConvergedError>())?;
    m.add("CapacityError", py.get_type::<CapacityError>())?;
    Ok(())
}
