//! Python bindings. Results come back as plain dicts built from the same JSON
//! the command-line reports carry.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use vvicert_core::audit::{self, RandomInstanceSpec, RuleId};
use vvicert_core::certify::{self, gordan_alternative, CheckSpec};
use vvicert_core::cone::OrderingCone;
use vvicert_core::linalg::Matrix;
use vvicert_core::problem::Problem;
use vvicert_core::sampling::SamplingPlan;

fn err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn plan(seed: u64, samples: usize) -> PyResult<SamplingPlan> {
    let plan = SamplingPlan::default()
        .with_seed(seed)
        .with_samples(samples);
    plan.validate().map_err(err)?;
    Ok(plan)
}

/// A validated problem: piecewise function, ordering cone, kernel and `e`.
#[pyclass(name = "Problem", module = "vvicert", frozen)]
struct PyProblem {
    inner: Problem,
}

#[pymethods]
impl PyProblem {
    /// Load a JSON problem file, or a bundled fixture (`example5`, `example23`).
    #[staticmethod]
    #[pyo3(signature = (path_or_name, strict = false))]
    fn load(path_or_name: &str, strict: bool) -> PyResult<Self> {
        Problem::load(path_or_name, strict)
            .map(|inner| PyProblem { inner })
            .map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (text, strict = false))]
    fn from_json(text: &str, strict: bool) -> PyResult<Self> {
        Problem::from_json(text, strict)
            .map(|inner| PyProblem { inner })
            .map_err(err)
    }

    /// Random piecewise polynomial instance drawn from `seed`.
    #[staticmethod]
    fn generate(seed: u64) -> PyResult<Self> {
        audit::generate_instance(&RandomInstanceSpec::from_seed(seed))
            .map(|inner| PyProblem { inner })
            .map_err(err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.f.input_dim()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.f.output_dim()
    }

    #[getter]
    fn e(&self) -> Vec<f64> {
        self.inner.e.clone()
    }

    #[getter]
    fn hash(&self) -> &str {
        self.inner.hash()
    }

    #[getter]
    fn kernel(&self) -> &'static str {
        self.inner.kernel.name()
    }

    #[getter]
    fn points(&self) -> std::collections::BTreeMap<String, Vec<f64>> {
        self.inner.points.clone()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// Same problem with another built-in kernel.
    fn with_kernel(&self, kind: &str) -> PyResult<Self> {
        let kind =
            serde_json::from_value(serde_json::Value::String(kind.to_string())).map_err(err)?;
        self.inner
            .with_kernel(kind)
            .map(|inner| PyProblem { inner })
            .map_err(err)
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.f.eval(&x).map_err(err)
    }

    /// Vertices of the generalized Jacobian at `x`, each as a list of rows.
    fn jacobian(&self, x: Vec<f64>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let poly = self
            .inner
            .f
            .clarke_jacobian(&x, SamplingPlan::default().tolerances.active)
            .map_err(err)?;
        Ok(poly.vertices.iter().map(Matrix::to_rows).collect())
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(name={:?}, n={}, m={}, pieces={})",
            self.inner.name,
            self.inner.f.input_dim(),
            self.inner.f.output_dim(),
            self.inner.f.pieces().len()
        )
    }
}

fn run_check(
    py: Python<'_>,
    problem: &PyProblem,
    spec: CheckSpec,
    seed: u64,
    samples: usize,
) -> PyResult<Py<PyAny>> {
    let plan = plan(seed, samples)?;
    let p = &problem.inner;
    let cert = py
        .detach(|| p.context(&plan).and_then(|ctx| certify::run(&ctx, &spec)))
        .map_err(err)?;
    to_py(py, &cert)
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// Local quasi efficiency (or quasi weak efficiency) of `xi`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (problem, xi, e = None, r = 0.25, weak = false, seed = 42, samples = 10_000))]
fn check_efficiency(
    py: Python<'_>,
    problem: &PyProblem,
    xi: Vec<f64>,
    e: Option<Vec<f64>>,
    r: f64,
    weak: bool,
    seed: u64,
    samples: usize,
) -> PyResult<Py<PyAny>> {
    let e = e.unwrap_or_else(|| problem.inner.e.clone());
    run_check(
        py,
        problem,
        CheckSpec::Efficiency { xi, e, r, weak },
        seed,
        samples,
    )
}

/// Whether `xi` solves a vector variational inequality (`svvi`, `mvvi`, `wsvvi`, `wmvvi`).
#[pyfunction]
#[pyo3(signature = (problem, xi, variant = "svvi", quantifier = "forall", seed = 42, samples = 10_000))]
fn check_vvi(
    py: Python<'_>,
    problem: &PyProblem,
    xi: Vec<f64>,
    variant: &str,
    quantifier: &str,
    seed: u64,
    samples: usize,
) -> PyResult<Py<PyAny>> {
    let spec = CheckSpec::Vvi {
        variant: parse(variant)?,
        xi,
        quantifier: parse(quantifier)?,
    };
    run_check(py, problem, spec, seed, samples)
}

/// Approximate invexity class at `x0` (`invex`, `pseudo1`, `pseudo2`, `quasi1`, `quasi2`).
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (problem, x0, class_ = "invex", e = None, r = 0.25, seed = 42, samples = 10_000))]
fn check_invex(
    py: Python<'_>,
    problem: &PyProblem,
    x0: Vec<f64>,
    class_: &str,
    e: Option<Vec<f64>>,
    r: f64,
    seed: u64,
    samples: usize,
) -> PyResult<Py<PyAny>> {
    let spec = CheckSpec::Invex {
        class: parse(class_)?,
        x0,
        e: e.unwrap_or_else(|| problem.inner.e.clone()),
        r,
    };
    run_check(py, problem, spec, seed, samples)
}

#[pyfunction]
#[pyo3(signature = (problem, xi, seed = 42))]
fn check_critical(
    py: Python<'_>,
    problem: &PyProblem,
    xi: Vec<f64>,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    run_check(py, problem, CheckSpec::Critical { xi }, seed, 1)
}

/// Gordan's alternative for `a` (rows are objectives) over the nonnegative orthant.
#[pyfunction]
fn gordan(py: Python<'_>, a: Vec<Vec<f64>>) -> PyResult<Py<PyAny>> {
    let a = Matrix::from_rows(&a).map_err(err)?;
    let cone = OrderingCone::orthant(a.nrows()).map_err(err)?;
    let outcome = gordan_alternative(&a, &cone).map_err(err)?;
    to_py(py, &outcome)
}

/// Audit theorem rules (`"all"` or e.g. `"T3.1,T4.6"`) on `problem` at `point`.
#[pyfunction]
#[pyo3(signature = (problem, point, rules = "all", r = 0.25, seed = 42, samples = 10_000))]
fn audit_problem(
    py: Python<'_>,
    problem: &PyProblem,
    point: Vec<f64>,
    rules: &str,
    r: f64,
    seed: u64,
    samples: usize,
) -> PyResult<Py<PyAny>> {
    let rules = RuleId::parse_list(rules).map_err(err)?;
    let plan = plan(seed, samples)?;
    let instances = vec![(problem.inner.clone(), point)];
    let summary = py
        .detach(|| audit::run_matrix(&rules, &instances, r, &plan))
        .map_err(err)?;
    to_py(py, &summary)
}

/// Run the command-line tool in-process; returns `(exit_code, stdout, stderr)`.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> (i32, String, String) {
    py.detach(|| {
        let mut out = Vec::new();
        let mut errs = Vec::new();
        let argv = std::iter::once("vvicert".to_string()).chain(args);
        let code = vvicert_core::cli::run(argv, &mut out, &mut errs);
        (
            code,
            String::from_utf8_lossy(&out).into_owned(),
            String::from_utf8_lossy(&errs).into_owned(),
        )
    })
}

#[pymodule]
fn vvicert(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(check_efficiency, m)?)?;
    m.add_function(wrap_pyfunction!(check_vvi, m)?)?;
    m.add_function(wrap_pyfunction!(check_invex, m)?)?;
    m.add_function(wrap_pyfunction!(check_critical, m)?)?;
    m.add_function(wrap_pyfunction!(gordan, m)?)?;
    m.add_function(wrap_pyfunction!(audit_problem, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("FORMAT_VERSION", vvicert_core::problem::FORMAT_VERSION)?;
    Ok(())
}
