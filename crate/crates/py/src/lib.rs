//! Python bindings: problem configs, training runs with their scores and
//! fields, gradient checks and the R² metric.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use thermopinn::fields::FieldModel;
use thermopinn::gradcheck;
use thermopinn::metrics::{self, Solution, Variable};
use thermopinn::problems::{self, ProblemCode};
use thermopinn::report::{self, SolutionReport};
use thermopinn::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::UnknownProblem(_) | Error::Parse(_) | Error::Shape(_) => {
            PyValueError::new_err(e.to_string())
        }
        Error::NonFinite { .. } | Error::Singular(_) | Error::DivisionByZero(_) => {
            PyArithmeticError::new_err(e.to_string())
        }
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_code(code: &str) -> PyResult<ProblemCode> {
    code.parse().map_err(to_py)
}

fn parse_variable(label: &str) -> PyResult<Variable> {
    Variable::ALL
        .into_iter()
        .find(|v| v.label() == label)
        .ok_or_else(|| PyValueError::new_err(format!("unknown variable `{label}`")))
}

/// Problem configuration: node set, material, loads, networks and training
/// settings.
#[pyclass(name = "ProblemSpec", module = "thermopinn", from_py_object)]
#[derive(Clone)]
pub struct PyProblemSpec {
    inner: problems::ProblemSpec,
}

#[pymethods]
impl PyProblemSpec {
    /// Defaults for one of the benchmark problems, e.g. "1D-FGM-ELAS-NEU".
    #[new]
    fn new(code: &str) -> PyResult<Self> {
        Ok(Self {
            inner: problems::ProblemSpec::default_for(parse_code(code)?),
        })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = problems::ProblemSpec::from_toml(text).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(to_py)
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    #[getter]
    fn code(&self) -> &'static str {
        self.inner.code.as_str()
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.train.epochs
    }

    #[setter]
    fn set_epochs(&mut self, epochs: usize) {
        self.inner.train.epochs = epochs;
    }

    #[getter]
    fn learning_rate(&self) -> f64 {
        self.inner.train.learning_rate
    }

    #[setter]
    fn set_learning_rate(&mut self, lr: f64) {
        self.inner.train.learning_rate = lr;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.train.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.train.seed = seed;
    }

    /// Interior node coordinates as (x1, x2) pairs.
    fn nodes(&self) -> PyResult<Vec<(f64, f64)>> {
        let nodes = self.inner.build_nodes().map_err(to_py)?;
        Ok(nodes.points.iter().map(|p| (p[0], p[1])).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "ProblemSpec('{}', epochs={}, learning_rate={}, seed={})",
            self.inner.code, self.inner.train.epochs, self.inner.train.learning_rate, self.inner.train.seed
        )
    }
}

/// A trained model with its loss history and scores against the reference.
#[pyclass(name = "Run", module = "thermopinn", frozen)]
pub struct PyRun {
    field: FieldModel,
    report: SolutionReport,
}

impl PyRun {
    fn column(&self, v: Variable, reference: bool) -> PyResult<Vec<f64>> {
        let states = if reference {
            &self.report.reference.values
        } else {
            &self.report.solution.values
        };
        states
            .iter()
            .map(|s| v.of(s))
            .collect::<Option<_>>()
            .ok_or_else(|| PyValueError::new_err(format!("`{v}` is not defined for {}", self.report.spec.code)))
    }
}

#[pymethods]
impl PyRun {
    #[getter]
    fn code(&self) -> &'static str {
        self.report.spec.code.as_str()
    }

    /// True when every acceptance requirement for the problem holds.
    #[getter]
    fn passed(&self) -> bool {
        self.report.passed()
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.report.trace.epochs()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.report.trace.stop == thermopinn::trainer::StopReason::Converged
    }

    /// Total loss at the start of each epoch.
    #[getter]
    fn loss_history(&self) -> Vec<f64> {
        self.report.trace.history.iter().map(|l| l.total).collect()
    }

    #[getter]
    fn final_loss<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let l = &self.report.trace.final_loss;
        let d = PyDict::new(py);
        d.set_item("elastic", l.elastic)?;
        d.set_item("thermal", l.thermal)?;
        d.set_item("external", l.external)?;
        d.set_item("total", l.total)?;
        Ok(d)
    }

    /// Scores keyed by variable label over the comparison region.
    fn scores<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        for s in &self.report.scores {
            let d = PyDict::new(py);
            d.set_item("r2", s.r2)?;
            d.set_item("mse", s.mse)?;
            d.set_item("max_abs_error", s.max_abs_error)?;
            d.set_item("low_variance", s.low_variance)?;
            out.set_item(s.variable.label(), d)?;
        }
        Ok(out)
    }

    /// (variable, requirement, passed) for each acceptance check.
    fn checks(&self) -> Vec<(&'static str, String, bool)> {
        self.report
            .checks
            .iter()
            .map(|c| (c.variable.label(), c.requirement.to_string(), c.passed))
            .collect()
    }

    #[getter]
    fn points(&self) -> Vec<(f64, f64)> {
        self.report.solution.points.iter().map(|p| (p[0], p[1])).collect()
    }

    /// Predicted values of one variable at every node.
    fn prediction(&self, variable: &str) -> PyResult<Vec<f64>> {
        self.column(parse_variable(variable)?, false)
    }

    /// Reference values of one variable at every node.
    fn reference(&self, variable: &str) -> PyResult<Vec<f64>> {
        self.column(parse_variable(variable)?, true)
    }

    /// Evaluates the trained model at arbitrary points; returns label → values.
    fn predict<'py>(&self, py: Python<'py>, points: Vec<(f64, f64)>) -> PyResult<Bound<'py, PyDict>> {
        let pts: Vec<[f64; 2]> = points.into_iter().map(|(a, b)| [a, b]).collect();
        let sol = Solution::from_field(&self.field, &self.report.spec.material, &pts).map_err(to_py)?;
        let out = PyDict::new(py);
        for v in Variable::ALL {
            if let Some(col) = sol.values.iter().map(|s| v.of(s)).collect::<Option<Vec<f64>>>() {
                if v.applies_to(self.report.spec.code) {
                    out.set_item(v.label(), col)?;
                }
            }
        }
        Ok(out)
    }

    /// Writes CSVs, the resolved config and SVG plots; returns the paths.
    fn write(&self, dir: PathBuf) -> PyResult<Vec<PathBuf>> {
        self.report.write_all(&dir).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Run('{}', epochs={}, passed={})",
            self.report.spec.code,
            self.report.trace.epochs(),
            if self.report.passed() { "True" } else { "False" }
        )
    }
}

/// Trains `spec` and scores it. Releases the GIL while training.
#[pyfunction]
fn run(py: Python<'_>, spec: PyProblemSpec) -> PyResult<PyRun> {
    let (field, report) = py.detach(|| report::run(&spec.inner)).map_err(to_py)?;
    Ok(PyRun { field, report })
}

/// Compares sampled analytic loss gradients with central differences.
/// Returns (passed, max relative error among parameters whose absolute
/// error exceeds 1e-8).
#[pyfunction]
#[pyo3(signature = (spec, seed = 0, per_layer = 4))]
fn gradient_check(py: Python<'_>, spec: PyProblemSpec, seed: u64, per_layer: usize) -> PyResult<(bool, f64)> {
    let c = py
        .detach(|| gradcheck::gradient_check(&spec.inner, seed, per_layer))
        .map_err(to_py)?;
    Ok((c.passed(), c.max_rel_error()))
}

#[pyfunction]
fn r2(truth: Vec<f64>, pred: Vec<f64>) -> PyResult<f64> {
    metrics::r2(&truth, &pred).map_err(to_py)
}

#[pyfunction]
fn problem_codes() -> Vec<&'static str> {
    ProblemCode::ALL.iter().map(|c| c.as_str()).collect()
}

#[pymodule]
#[pyo3(name = "thermopinn")]
pub fn thermopinn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblemSpec>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check, m)?)?;
    m.add_function(wrap_pyfunction!(r2, m)?)?;
    m.add_function(wrap_pyfunction!(problem_codes, m)?)?;
    Ok(())
}
