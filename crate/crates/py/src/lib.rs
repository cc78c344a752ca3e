//! Python bindings: kernels, potentials, Feynman-Kac estimators, the interval
//! solver, the discrete operator and the verification harnesses.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use qharm_core::domain::{BallSpec, DomainSpec};
use qharm_core::error::Error as CoreError;
use qharm_core::feynman_kac as fk;
use qharm_core::kernels;
use qharm_core::spectral;
use qharm_core::stats::McEstimate;
use qharm_core::verification as ver;

fn err(e: CoreError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

type PyRes<T> = PyResult<T>;

#[pyclass(name = "StableParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyStableParams(kernels::StableParams);

#[pymethods]
impl PyStableParams {
    #[new]
    fn new(d: usize, alpha: f64) -> PyRes<Self> {
        kernels::StableParams::new(d, alpha).map(Self).map_err(err)
    }

    #[getter]
    fn d(&self) -> usize {
        self.0.d
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    fn __repr__(&self) -> String {
        format!("StableParams(d={}, alpha={})", self.0.d, self.0.alpha)
    }
}

#[pyclass(name = "Domain", frozen, from_py_object)]
#[derive(Clone)]
struct PyDomain(DomainSpec);

#[pymethods]
impl PyDomain {
    #[staticmethod]
    fn interval(a: f64, b: f64) -> PyRes<Self> {
        DomainSpec::interval(a, b).map(Self).map_err(err)
    }

    #[staticmethod]
    fn ball(center: Vec<f64>, radius: f64) -> PyRes<Self> {
        BallSpec::new(center, radius).map(|b| Self(DomainSpec::Ball(b))).map_err(err)
    }

    fn contains(&self, x: Vec<f64>) -> bool {
        self.0.contains(&x)
    }

    fn delta(&self, x: Vec<f64>) -> f64 {
        self.0.delta(&x)
    }

    fn __repr__(&self) -> String {
        format!("Domain({:?})", self.0)
    }
}

#[pyclass(name = "Potential", frozen, from_py_object)]
#[derive(Clone)]
struct PyPotential(fk::PotentialSpec);

#[pymethods]
impl PyPotential {
    #[staticmethod]
    fn zero() -> Self {
        Self(fk::PotentialSpec::zero())
    }

    #[staticmethod]
    fn constant(c: f64) -> Self {
        Self(fk::PotentialSpec::constant(c))
    }

    /// c |x - center|^(-alpha) on the ball of the given radius.
    #[staticmethod]
    fn critical(alpha: f64, center: Vec<f64>, radius: f64) -> PyRes<Self> {
        fk::PotentialSpec::critical(alpha, center, radius).map(Self).map_err(err)
    }

    #[staticmethod]
    fn cone(center: Vec<f64>, radius: f64, eta: f64, c: f64) -> PyRes<Self> {
        fk::PotentialSpec::cone(center, radius, eta, c).map(Self).map_err(err)
    }

    #[staticmethod]
    fn ball_power(center: Vec<f64>, radius: f64, exponent: f64, c: f64) -> PyRes<Self> {
        fk::PotentialSpec::ball_power(center, radius, exponent, c).map(Self).map_err(err)
    }

    #[staticmethod]
    fn gaussian(center: Vec<f64>, width: f64, c: f64) -> PyRes<Self> {
        fk::PotentialSpec::gaussian(center, width, c).map(Self).map_err(err)
    }

    fn scaled(&self, s: f64) -> Self {
        Self(self.0.scaled(s))
    }

    fn __call__(&self, x: Vec<f64>) -> f64 {
        self.0.eval(&x)
    }

    #[getter]
    fn holder_eta(&self) -> f64 {
        self.0.holder_eta
    }

    fn __repr__(&self) -> String {
        format!("Potential({:?})", self.0.kind)
    }
}

#[pyclass(name = "BoundaryData", frozen, from_py_object)]
#[derive(Clone)]
struct PyBoundary(fk::BoundaryData);

#[pymethods]
impl PyBoundary {
    #[staticmethod]
    fn constant(c: f64) -> Self {
        Self(fk::BoundaryData::constant(c))
    }

    /// Indicator of lo < z_0 < hi.
    #[staticmethod]
    fn slab(lo: f64, hi: f64) -> Self {
        Self(fk::BoundaryData::slab_indicator(lo, hi))
    }

    fn __call__(&self, z: Vec<f64>) -> f64 {
        self.0.eval(&z)
    }
}

#[pyclass(name = "FkConfig", frozen, from_py_object)]
#[derive(Clone)]
struct PyFkConfig(fk::FkConfig);

#[pymethods]
impl PyFkConfig {
    #[new]
    #[pyo3(signature = (n, dt, seed, t_max = 20.0))]
    fn new(n: usize, dt: f64, seed: u64, t_max: f64) -> Self {
        let mut c = fk::FkConfig::new(n, dt, seed);
        c.t_max = t_max;
        c.t_cap = c.t_cap.max(t_max);
        Self(c)
    }

    fn __repr__(&self) -> String {
        format!("FkConfig(n={}, dt={}, seed={}, t_max={})", self.0.n, self.0.dt, self.0.seed, self.0.t_max)
    }
}

/// (mean, stderr) pairs cross the boundary as tuples.
fn pair(e: McEstimate) -> (f64, f64) {
    (e.mean, e.stderr)
}

#[pyfunction]
fn green_interval(r: f64, x: f64, y: f64) -> PyRes<f64> {
    kernels::green_interval(r, x, y).map_err(err)
}

#[pyfunction]
fn green_ball(p: &PyStableParams, center: Vec<f64>, radius: f64, x: Vec<f64>, y: Vec<f64>) -> PyRes<f64> {
    let b = BallSpec::new(center, radius).map_err(err)?;
    kernels::green_ball(&p.0, &b, &x, &y).map_err(err)
}

#[pyfunction]
fn poisson_kernel_ball(p: &PyStableParams, center: Vec<f64>, radius: f64, x: Vec<f64>, z: Vec<f64>) -> PyRes<f64> {
    let b = BallSpec::new(center, radius).map_err(err)?;
    kernels::poisson_kernel_ball(&p.0, &b, &x, &z).map_err(err)
}

#[pyfunction]
fn expected_exit_time_ball(p: &PyStableParams, center: Vec<f64>, radius: f64, x: Vec<f64>) -> PyRes<f64> {
    let b = BallSpec::new(center, radius).map_err(err)?;
    Ok(kernels::expected_exit_time_ball(&p.0, &b, &x))
}

/// Gauge E^x e_q(τ_D) as (mean, stderr).
#[pyfunction]
fn gauge(p: &PyStableParams, dom: &PyDomain, q: &PyPotential, x: Vec<f64>, cfg: &PyFkConfig) -> PyRes<(f64, f64)> {
    fk::gauge(&p.0, &dom.0, &q.0, &x, &cfg.0).map(pair).map_err(err)
}

/// q-harmonic extension of f at every start, from common paths.
#[pyfunction]
fn q_harmonic_eval(p: &PyStableParams, dom: &PyDomain, q: &PyPotential, f: &PyBoundary, xs: Vec<Vec<f64>>, cfg: &PyFkConfig) -> PyRes<Vec<(f64, f64)>> {
    let paths = fk::q_harmonic_paths(&p.0, &dom.0, &q.0, &f.0, &xs, &cfg.0).map_err(err)?;
    Ok((0..xs.len()).map(|j| pair(paths.estimate(j))).collect())
}

/// Deterministic solver for the q-harmonic extension on an interval.
#[pyclass(name = "IntervalSolver", frozen)]
struct PyIntervalSolver(fk::IntervalSolver);

#[pymethods]
impl PyIntervalSolver {
    #[new]
    #[pyo3(signature = (p, a, b, q, f, nodes = 96))]
    fn new(p: &PyStableParams, a: f64, b: f64, q: &PyPotential, f: &PyBoundary, nodes: usize) -> PyRes<Self> {
        fk::IntervalSolver::new(&p.0, a, b, &q.0, &f.0, nodes).map(Self).map_err(err)
    }

    fn __call__(&self, x: f64) -> f64 {
        self.0.eval(x)
    }
}

#[pyclass(name = "DiscreteOperator", frozen)]
struct PyOperator(spectral::DiscreteOperator);

#[pymethods]
impl PyOperator {
    #[new]
    fn new(p: &PyStableParams, a: f64, b: f64, m: usize) -> PyRes<Self> {
        spectral::build_discrete_frac_laplacian(&p.0, a, b, m).map(Self).map_err(err)
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.0.nodes.clone()
    }

    fn apply(&self, u: Vec<f64>) -> PyRes<Vec<f64>> {
        if u.len() != self.0.m {
            return Err(PyValueError::new_err(format!("expected {} values, got {}", self.0.m, u.len())));
        }
        Ok(self.0.apply(&u))
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        self.0.matrix.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// (eigenvalues, eigenvectors) of Δ^{α/2} + q, smallest λ first.
    #[pyo3(signature = (q, k = 1))]
    fn eigenpairs(&self, q: &PyPotential, k: usize) -> PyRes<(Vec<f64>, Vec<Vec<f64>>)> {
        let e = spectral::eigenpairs(&self.0, &q.0, k).map_err(err)?;
        Ok((e.values, e.vectors))
    }

    /// Largest pointwise residual of the n-th eigenpair over nodes with δ ≥ min_delta.
    #[pyo3(signature = (q, n = 0, min_delta = 0.25))]
    fn strong_residual(&self, q: &PyPotential, n: usize, min_delta: f64) -> PyRes<f64> {
        let e = spectral::eigenpairs(&self.0, &q.0, n + 1).map_err(err)?;
        spectral::strong_residual(&e, &q.0, n, min_delta).map(|r| r.max_abs).map_err(err)
    }

    fn critical_scale(&self, q0: &PyPotential) -> PyRes<f64> {
        spectral::critical_scale(&self.0, &q0.0).map_err(err)
    }
}

fn report_dict<'py>(py: Python<'py>, r: &ver::InequalityReport) -> PyRes<Bound<'py, pyo3::types::PyDict>> {
    let d = pyo3::types::PyDict::new(py);
    d.set_item("name", &r.name)?;
    d.set_item("grid", &r.grid)?;
    d.set_item("worst_ratio", r.worst_ratio)?;
    d.set_item("worst_location", &r.worst_location)?;
    d.set_item("kind", if r.kind == ver::BoundKind::Upper { "upper" } else { "lower" })?;
    d.set_item("tolerance", r.tolerance)?;
    d.set_item("pass", r.pass)?;
    d.set_item("extras", r.extras.clone())?;
    d.set_item("seed", r.seed)?;
    Ok(d)
}

fn profile_dict<'py>(py: Python<'py>, b: &ver::BlowupProfile) -> PyRes<Bound<'py, pyo3::types::PyDict>> {
    let d = pyo3::types::PyDict::new(py);
    d.set_item("h", &b.h)?;
    d.set_item("quotients", b.quotients.iter().map(|e| pair(*e)).collect::<Vec<_>>())?;
    d.set_item("b", pair(b.b))?;
    d.set_item("z", b.z)?;
    d.set_item("diverges", b.diverges())?;
    d.set_item("consistent_with_zero", b.consistent_with_zero())?;
    Ok(d)
}

/// Difference quotients of the gauge across |x - w| = r, Monte Carlo with common paths.
#[pyfunction]
fn counterexample_blowup<'py>(py: Python<'py>, p: &PyStableParams, dom: &PyDomain, q: &PyPotential, w: f64, r: f64, hs: Vec<f64>, cfg: &PyFkConfig) -> PyRes<Bound<'py, pyo3::types::PyDict>> {
    let b = ver::counterexample_blowup(&p.0, &dom.0, &q.0, w, r, &hs, &cfg.0).map_err(err)?;
    profile_dict(py, &b)
}

/// The same profile from the interval solver on (a, b).
#[pyfunction]
#[pyo3(signature = (p, a, b, q, w, r, hs, nodes = 96))]
fn counterexample_blowup_nystrom<'py>(py: Python<'py>, p: &PyStableParams, a: f64, b: f64, q: &PyPotential, w: f64, r: f64, hs: Vec<f64>, nodes: usize) -> PyRes<Bound<'py, pyo3::types::PyDict>> {
    let prof = ver::counterexample_blowup_nystrom(&p.0, a, b, &q.0, w, r, &hs, nodes).map_err(err)?;
    profile_dict(py, &prof)
}

#[pyfunction]
fn check_betau<'py>(py: Python<'py>, p: &PyStableParams, beta: f64, a_const: f64, ts: Vec<f64>) -> PyRes<Bound<'py, pyo3::types::PyDict>> {
    report_dict(py, &ver::check_betau(&p.0, beta, a_const, &ts).map_err(err)?)
}

#[pyfunction]
fn check_green_upper_bounds<'py>(py: Python<'py>, p: &PyStableParams, radius: f64, pairs: Vec<(Vec<f64>, Vec<f64>)>) -> PyRes<Bound<'py, pyo3::types::PyDict>> {
    report_dict(py, &ver::check_green_upper_bounds(&p.0, radius, &pairs).map_err(err)?)
}

#[pyfunction]
fn positive_grid_1d(radius: f64, n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    ver::positive_grid_1d(radius, n)
}

#[pyfunction]
fn dyadic_offsets(lo: i32, hi: i32) -> Vec<f64> {
    ver::dyadic_offsets(lo, hi)
}

/// Registered harnesses as {name, suite, anchor, summary} dicts.
#[pyfunction]
fn harnesses() -> Vec<BTreeMap<&'static str, &'static str>> {
    ver::HARNESSES
        .iter()
        .map(|h| BTreeMap::from([("name", h.name), ("suite", h.suite), ("anchor", h.anchor), ("summary", h.summary)]))
        .collect()
}

#[pymodule]
fn qharm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyStableParams>()?;
    m.add_class::<PyDomain>()?;
    m.add_class::<PyPotential>()?;
    m.add_class::<PyBoundary>()?;
    m.add_class::<PyFkConfig>()?;
    m.add_class::<PyIntervalSolver>()?;
    m.add_class::<PyOperator>()?;
    m.add_function(wrap_pyfunction!(green_interval, m)?)?;
    m.add_function(wrap_pyfunction!(green_ball, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_kernel_ball, m)?)?;
    m.add_function(wrap_pyfunction!(expected_exit_time_ball, m)?)?;
    m.add_function(wrap_pyfunction!(gauge, m)?)?;
    m.add_function(wrap_pyfunction!(q_harmonic_eval, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample_blowup, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample_blowup_nystrom, m)?)?;
    m.add_function(wrap_pyfunction!(check_betau, m)?)?;
    m.add_function(wrap_pyfunction!(check_green_upper_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(positive_grid_1d, m)?)?;
    m.add_function(wrap_pyfunction!(dyadic_offsets, m)?)?;
    m.add_function(wrap_pyfunction!(harnesses, m)?)?;
    Ok(())
}
