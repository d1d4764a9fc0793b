//! Python bindings: model loading, analytic transforms, performance measures,
//! the simulator and the comparison harness.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mmapq::analysis::Analyzer;
use mmapq::measures::{pgf_to_pmf as pmf_from_pgf, stationary_kpis};
use mmapq::model::{validate_model, ValidatedModel};
use mmapq::model_file::{load_model, load_model_file, save_model};
use mmapq::report::{analytic_rows, AnalyticRequest, ReportRow};
use mmapq::simulator::{compare, simulate, PhaseSemantics, SimOptions};
use mmapq::transient::{Method, TransformPoint};

create_exception!(pymmapq, ValidationError, PyValueError, "The model file or configuration is invalid.");
create_exception!(pymmapq, EvaluationError, PyRuntimeError, "A valid model could not be evaluated.");

fn py_err(e: mmapq::Error) -> PyErr {
    if e.is_validation() {
        ValidationError::new_err(e.to_string())
    } else {
        EvaluationError::new_err(e.to_string())
    }
}

fn method(name: &str) -> PyResult<Method> {
    name.parse().map_err(py_err)
}

fn row_dict<'py>(py: Python<'py>, r: &ReportRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("quantity", &r.quantity)?;
    d.set_item("type_index", r.type_index)?;
    d.set_item("env_state", r.env_state)?;
    d.set_item("t", r.t)?;
    d.set_item("value", r.value)?;
    d.set_item("stderr", r.stderr)?;
    d.set_item("method", &r.method)?;
    Ok(d)
}

fn rows_list<'py>(py: Python<'py>, rows: &[ReportRow]) -> PyResult<Vec<Bound<'py, PyDict>>> {
    rows.iter().map(|r| row_dict(py, r)).collect()
}

/// A validated model.
#[pyclass(module = "pymmapq", frozen)]
struct Model {
    inner: ValidatedModel,
}

impl Model {
    fn point(&self, z1: Vec<Complex64>, s1: Option<Vec<f64>>, z2: Option<Vec<Complex64>>, s2: Option<Vec<f64>>) -> TransformPoint {
        let k = self.inner.types();
        let c = self.inner.components();
        TransformPoint {
            z1,
            z2: z2.unwrap_or_else(|| vec![Complex64::new(1.0, 0.0); k]),
            s1: s1.unwrap_or_else(|| vec![0.0; c]),
            s2: s2.unwrap_or_else(|| vec![0.0; c]),
        }
    }
}

#[pymethods]
impl Model {
    /// Parses and validates TOML text.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let cfg = load_model(text).map_err(py_err)?;
        Ok(Model { inner: validate_model(&cfg).map_err(py_err)? })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let cfg = load_model_file(&path).map_err(py_err)?;
        Ok(Model { inner: validate_model(&cfg).map_err(py_err)? })
    }

    fn to_toml(&self) -> String {
        save_model(self.inner.config())
    }

    #[getter]
    fn types(&self) -> usize {
        self.inner.types()
    }

    #[getter]
    fn phases(&self) -> usize {
        self.inner.phases()
    }

    #[getter]
    fn states(&self) -> usize {
        self.inner.state_count()
    }

    #[getter]
    fn components(&self) -> usize {
        self.inner.components()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.grid().horizon()
    }

    #[getter]
    fn step(&self) -> f64 {
        self.inner.grid().step()
    }

    /// Transient transform on the model grid: `(times, values)` mixed over the initial law.
    #[pyo3(signature = (z1, s1=None, z2=None, s2=None, method="ode"))]
    fn transient(
        &self,
        z1: Vec<Complex64>,
        s1: Option<Vec<f64>>,
        z2: Option<Vec<Complex64>>,
        s2: Option<Vec<f64>>,
        method: &str,
    ) -> PyResult<(Vec<f64>, Vec<Complex64>)> {
        let a = Analyzer::new(&self.inner, self::method(method)?).map_err(py_err)?;
        let tr = a.transient(&self.point(z1, s1, z2, s2)).map_err(py_err)?;
        let times = (0..=tr.grid.steps()).map(|k| tr.grid.time(k)).collect();
        Ok((times, tr.mixed))
    }

    /// Stationary transform.
    #[pyo3(signature = (z1, s1=None, z2=None, s2=None, method="ode"))]
    fn stationary(
        &self,
        z1: Vec<Complex64>,
        s1: Option<Vec<f64>>,
        z2: Option<Vec<Complex64>>,
        s2: Option<Vec<f64>>,
        method: &str,
    ) -> PyResult<Complex64> {
        let a = Analyzer::new(&self.inner, self::method(method)?).map_err(py_err)?;
        a.stationary(&self.point(z1, s1, z2, s2)).map_err(py_err)
    }

    /// Stationary means: per-type lists under `L_q`, `L_los`, `L_los_rate`, `delta`.
    fn kpis<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let k = stationary_kpis(&self.inner).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("L_q", k.l_q)?;
        d.set_item("L_los", k.l_los)?;
        d.set_item("L_los_rate", k.l_los_rate)?;
        d.set_item("delta", k.delta)?;
        d.set_item("tail_bound", k.tail_bound)?;
        Ok(d)
    }

    /// The rows written by `mmapq analyze`.
    #[pyo3(signature = (method="ode", z_points=vec![0.3, 0.6, 0.9], s_points=vec![0.5, 1.0], with_pmf=true))]
    fn analyze<'py>(
        &self,
        py: Python<'py>,
        method: &str,
        z_points: Vec<f64>,
        s_points: Vec<f64>,
        with_pmf: bool,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let m = self::method(method)?;
        let request = AnalyticRequest { z_points, s_points, with_pmf, ..Default::default() };
        let rows = py
            .detach(|| Analyzer::new(&self.inner, m).and_then(|a| analytic_rows(&a, &request)))
            .map_err(py_err)?;
        rows_list(py, &rows)
    }

    /// Monte-Carlo estimate rows.
    #[pyo3(signature = (reps=10_000, seed=1, phase="keep", z_points=vec![0.3, 0.6, 0.9], s_points=vec![0.5, 1.0]))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        reps: usize,
        seed: u64,
        phase: &str,
        z_points: Vec<f64>,
        s_points: Vec<f64>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let opts = self.options(reps, seed, phase, z_points, s_points)?;
        let est = py.detach(|| simulate(&self.inner, &opts)).map_err(py_err)?;
        rows_list(py, &est.rows)
    }

    /// Scores the analytic rows against a simulation: `(all_pass, rows)`, each
    /// row's `value` being the z-score.
    #[pyo3(signature = (reps=10_000, seed=1, z_threshold=3.0, method="ode", phase="keep"))]
    fn compare<'py>(
        &self,
        py: Python<'py>,
        reps: usize,
        seed: u64,
        z_threshold: f64,
        method: &str,
        phase: &str,
    ) -> PyResult<(bool, Vec<Bound<'py, PyDict>>)> {
        let m = self::method(method)?;
        let opts = self.options(reps, seed, phase, vec![0.3, 0.6, 0.9], vec![0.5, 1.0])?;
        let report = py
            .detach(|| {
                let a = Analyzer::new(&self.inner, m)?;
                let analytic = analytic_rows(&a, &AnalyticRequest { with_pmf: false, ..Default::default() })?;
                let est = simulate(&self.inner, &opts)?;
                compare(&est, &analytic, z_threshold)
            })
            .map_err(py_err)?;
        Ok((report.all_pass(), rows_list(py, &report.rows())?))
    }
}

impl Model {
    fn options(&self, reps: usize, seed: u64, phase: &str, z_points: Vec<f64>, s_points: Vec<f64>) -> PyResult<SimOptions> {
        let mut opts = SimOptions::new(self.inner.grid().horizon(), reps, seed);
        opts.phase = phase.parse::<PhaseSemantics>().map_err(PyValueError::new_err)?;
        opts.z_points = z_points;
        opts.s_points = s_points;
        Ok(opts)
    }
}

/// Inverts a PGF given as a Python callable on complex numbers: `(probs, tail)`.
#[pyfunction]
fn pgf_to_pmf(py: Python<'_>, pgf: Py<PyAny>, n_max: usize) -> PyResult<(Vec<f64>, f64)> {
    let pmf = py
        .detach(|| {
            pmf_from_pgf(
                |z| {
                    Python::attach(|py| pgf.call1(py, (z,)).and_then(|v| v.extract::<Complex64>(py)))
                        .map_err(|e| mmapq::Error::Domain(format!("pgf callable failed: {e}")))
                },
                n_max,
            )
        })
        .map_err(py_err)?;
    Ok((pmf.probs, pmf.tail))
}

#[pymodule]
fn pymmapq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(pgf_to_pmf, m)?)?;
    m.add("ValidationError", m.py().get_type::<ValidationError>())?;
    m.add("EvaluationError", m.py().get_type::<EvaluationError>())?;
    Ok(())
}
