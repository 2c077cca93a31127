//! Python bindings for `weylcalc`.
//!
//! Series and operators are wrapped as classes. Structured results (fit
//! reports, orbit constructions, verification reports) come back as plain
//! Python dicts decoded from the same JSON the CLI writes.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use weylcalc::cli::{parse_operator_json, OrbitProblemSpec};
use weylcalc::operator::{OperatorSpec, ParsedOperator};
use weylcalc::orbit::{construct_orbit_with, verify_orbit_with, OrbitConfig, OrbitConstruction, OrbitProblem};
use weylcalc::report::{to_canonical_json, ErrorReport};
use weylcalc::{
    commutator_check as core_commutator_check, completeness_fit as core_completeness_fit, kernel_basis as core_kernel_basis,
    DiskSpec, EigenFamily, LambdaSet, Operator, C64,
};

create_exception!(weylcalc_py, WeylcalcError, PyValueError);

fn to_py_err(e: weylcalc::Error) -> PyErr {
    let report = ErrorReport::from(&e);
    WeylcalcError::new_err(format!("{}: {}", report.kind, report.message))
}

fn to_dict<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = to_canonical_json(value).map_err(to_py_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "TaylorSeries", module = "weylcalc_py", from_py_object)]
#[derive(Clone)]
pub struct PySeries {
    inner: weylcalc::TaylorSeries,
}

#[pymethods]
impl PySeries {
    /// `exact=True` marks every coefficient beyond the list as zero.
    #[new]
    #[pyo3(signature = (coeffs, label = String::new(), exact = false))]
    fn new(coeffs: Vec<C64>, label: String, exact: bool) -> PyResult<Self> {
        let inner = if exact {
            weylcalc::TaylorSeries::polynomial(coeffs, label)
        } else {
            weylcalc::TaylorSeries::new(coeffs, label)
        }
        .map_err(to_py_err)?;
        Ok(PySeries { inner })
    }

    #[staticmethod]
    fn exponential(lam: C64, order: usize) -> Self {
        PySeries { inner: weylcalc::TaylorSeries::exponential(lam, order) }
    }

    #[staticmethod]
    fn gaussian(alpha: C64, order: usize) -> Self {
        PySeries { inner: weylcalc::TaylorSeries::gaussian(alpha, order) }
    }

    #[getter]
    fn coeffs(&self) -> Vec<C64> {
        self.inner.coeffs().to_vec()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn valid_order(&self) -> usize {
        self.inner.valid_order()
    }

    #[getter]
    fn exact(&self) -> bool {
        self.inner.is_exact()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __call__(&self, z: C64) -> C64 {
        self.inner.evaluate(z)
    }

    fn evaluate(&self, z: C64) -> C64 {
        self.inner.evaluate(z)
    }

    fn translate(&self, lam: C64) -> Self {
        PySeries { inner: self.inner.translate(lam) }
    }

    #[pyo3(signature = (k = 1))]
    fn differentiate(&self, k: usize) -> PyResult<Self> {
        Ok(PySeries { inner: self.inner.differentiate(k).map_err(to_py_err)? })
    }

    #[pyo3(signature = (radius = 1.0))]
    fn sup_norm(&self, radius: f64) -> PyResult<f64> {
        let disk = DiskSpec::with_radius(radius).map_err(to_py_err)?;
        Ok(self.inner.disk_sup_norm(&disk))
    }

    fn to_json(&self) -> PyResult<String> {
        to_canonical_json(&self.inner).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!("TaylorSeries(label={:?}, len={}, valid_order={})", self.inner.label(), self.inner.len(), self.inner.valid_order())
    }
}

/// `T = M − a z I`, optionally composed as `L(T)`.
#[pyclass(name = "Operator", module = "weylcalc_py", from_py_object)]
#[derive(Clone)]
pub struct PyOperator {
    inner: ParsedOperator,
}

#[pymethods]
impl PyOperator {
    #[new]
    #[pyo3(signature = (d, a, l = None))]
    fn new(d: Vec<C64>, a: C64, l: Option<Vec<C64>>) -> PyResult<Self> {
        let spec = OperatorSpec { d, a, l: l.map(weylcalc::operator::SpecPoly) };
        Ok(PyOperator { inner: spec.into_operator().map_err(to_py_err)? })
    }

    /// Accepts the CLI operator JSON, e.g. `{"d": [[0,0],[1,0]], "a": [1,0]}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyOperator { inner: parse_operator_json(text).map_err(to_py_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        to_canonical_json(&OperatorSpec::from_operator(&self.inner)).map_err(to_py_err)
    }

    #[getter]
    fn a(&self) -> C64 {
        self.inner.base().a
    }

    #[getter]
    fn d(&self) -> Vec<C64> {
        self.inner.base().m.coeffs().to_vec()
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.base().order()
    }

    /// Applies `L(T)` (or `T` when no `L` was given).
    fn apply(&self, f: &PySeries) -> PyResult<PySeries> {
        let out = match &self.inner {
            ParsedOperator::Weyl(t) => t.apply(&f.inner),
            ParsedOperator::Composite(c) => c.apply(&f.inner),
        };
        Ok(PySeries { inner: out.map_err(to_py_err)? })
    }

    /// Eigenvalue of the operator on the family member indexed by `lam`.
    fn eigenvalue(&self, lam: C64) -> C64 {
        let c = self.inner.composite();
        weylcalc::orbit::composite_eigenvalue(&c, lam)
    }

    fn __repr__(&self) -> PyResult<String> {
        Ok(format!("Operator({})", self.to_json()?.split_whitespace().collect::<String>()))
    }
}

/// Returns `(solutions, residuals)` for the formal kernel of the base operator.
#[pyfunction]
#[pyo3(signature = (op, terms = 40))]
fn kernel_basis(op: &PyOperator, terms: usize) -> PyResult<(Vec<PySeries>, Vec<f64>)> {
    let b = core_kernel_basis(op.inner.base(), terms).map_err(to_py_err)?;
    Ok((b.solutions.into_iter().map(|inner| PySeries { inner }).collect(), b.residuals))
}

/// `[T, D]` on monomials up to `ncap`; returns the recovered scalar and off-diagonal size.
#[pyfunction]
#[pyo3(signature = (op, ncap = 64))]
fn commutator_check(py: Python<'_>, op: &PyOperator, ncap: usize) -> PyResult<Py<PyAny>> {
    let t = op.inner.base();
    let d = weylcalc::ConvolutionOperator::derivative(1);
    let (_, check) = core_commutator_check(t, &d, ncap).map_err(to_py_err)?;
    to_dict(py, &check)
}

/// Fits `target` by eigenfunctions of `op` at the given λ's on the disk of `radius`.
#[pyfunction]
#[pyo3(signature = (op, lambdas, target, radius = 1.0, terms = 128, ridge = weylcalc::eigen::DEFAULT_RIDGE))]
fn completeness_fit(
    py: Python<'_>,
    op: &PyOperator,
    lambdas: Vec<C64>,
    target: &PySeries,
    radius: f64,
    terms: usize,
    ridge: f64,
) -> PyResult<Py<PyAny>> {
    let family = EigenFamily::for_operator(op.inner.base(), terms).map_err(to_py_err)?;
    let set = LambdaSet::new(lambdas, "python").map_err(to_py_err)?;
    let disk = DiskSpec::with_radius(radius).map_err(to_py_err)?;
    let report = core_completeness_fit(&family, &set, &target.inner, &disk, ridge).map_err(to_py_err)?;
    to_dict(py, &report)
}

/// An orbit problem parsed from the CLI problem JSON.
#[pyclass(name = "OrbitProblem", module = "weylcalc_py")]
pub struct PyOrbitProblem {
    inner: OrbitProblem,
}

#[pymethods]
impl PyOrbitProblem {
    #[new]
    #[pyo3(signature = (op, targets, radius = 1.0, epsilon = 1e-3, terms = 128))]
    fn new(op: &PyOperator, targets: Vec<PySeries>, radius: f64, epsilon: f64, terms: usize) -> PyResult<Self> {
        let spec = OrbitProblemSpec {
            operator: OperatorSpec::from_operator(&op.inner),
            targets: targets.into_iter().map(|t| t.inner).collect(),
            radius,
            epsilon,
        };
        Ok(PyOrbitProblem { inner: spec.into_problem(terms).map_err(to_py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (text, terms = 128))]
    fn from_json(text: &str, terms: usize) -> PyResult<Self> {
        let spec: OrbitProblemSpec =
            serde_json::from_str(text).map_err(|e| WeylcalcError::new_err(format!("MalformedSpec: {e}")))?;
        Ok(PyOrbitProblem { inner: spec.into_problem(terms).map_err(to_py_err)? })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }
}

/// A finished construction; `report()` gives the full dict.
#[pyclass(name = "OrbitConstruction", module = "weylcalc_py")]
pub struct PyOrbitConstruction {
    inner: OrbitConstruction,
}

#[pymethods]
impl PyOrbitConstruction {
    #[getter]
    fn schedule(&self) -> Vec<usize> {
        self.inner.schedule.clone()
    }

    /// Taylor coefficients of the constructed orbit vector.
    fn vector(&self) -> PySeries {
        PySeries { inner: self.inner.f.clone() }
    }

    fn report(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_dict(py, &self.inner)
    }
}

#[pyfunction]
#[pyo3(signature = (problem, lambdas = 24, margin = 0.5, gap = 1.25, block_growth = 2.0))]
fn construct_orbit(
    problem: &PyOrbitProblem,
    lambdas: usize,
    margin: f64,
    gap: f64,
    block_growth: f64,
) -> PyResult<PyOrbitConstruction> {
    let config = OrbitConfig { block_growth, ..OrbitConfig::default() };
    let inner = construct_orbit_with(&problem.inner, lambdas, margin, gap, &config).map_err(to_py_err)?;
    Ok(PyOrbitConstruction { inner })
}

#[pyfunction]
#[pyo3(signature = (construction, problem, direct_cap = 40))]
fn verify_orbit(
    py: Python<'_>,
    construction: &PyOrbitConstruction,
    problem: &PyOrbitProblem,
    direct_cap: usize,
) -> PyResult<Py<PyAny>> {
    let report = verify_orbit_with(&construction.inner, &problem.inner, direct_cap).map_err(to_py_err)?;
    to_dict(py, &report)
}

#[pymodule]
fn weylcalc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("WeylcalcError", m.py().get_type::<WeylcalcError>())?;
    m.add_class::<PySeries>()?;
    m.add_class::<PyOperator>()?;
    m.add_class::<PyOrbitProblem>()?;
    m.add_class::<PyOrbitConstruction>()?;
    m.add_function(wrap_pyfunction!(kernel_basis, m)?)?;
    m.add_function(wrap_pyfunction!(commutator_check, m)?)?;
    m.add_function(wrap_pyfunction!(completeness_fit, m)?)?;
    m.add_function(wrap_pyfunction!(construct_orbit, m)?)?;
    m.add_function(wrap_pyfunction!(verify_orbit, m)?)?;
    Ok(())
}
