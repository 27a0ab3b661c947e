//! Python bindings: load an experiment config, validate it, solve for gains,
//! roll out simulations, and cross-check against the centralized oracle.
//! Matrices cross the boundary as nested lists (row-major).

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};
use serde_json::Value;

use mflqr::cli;
use mflqr::config::ExperimentConfig;
use mflqr::linalg::to_nested;
use mflqr::model::{validate, Horizon};
use mflqr::sim;
use mflqr::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::SingularInnerMatrix { .. }
        | Error::NotConverged { .. }
        | Error::Diverged { .. }
        | Error::SingularGain { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix_from(name: &str, rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(PyValueError::new_err(format!("{name} must be non-empty")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!("{name} rows have unequal lengths")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let converted: Vec<_> =
                items.iter().map(|x| json_to_py(py, x)).collect::<PyResult<_>>()?;
            PyList::new(py, converted)?.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)?)?;
            }
            dict.into_any()
        }
    })
}

/// A parsed experiment: model, cost, seed, and run count.
#[pyclass]
struct Experiment {
    cfg: ExperimentConfig,
}

#[pymethods]
impl Experiment {
    /// Parse an experiment from a JSON config string.
    #[new]
    fn new(config_json: &str) -> PyResult<Self> {
        let cfg = mflqr::config::parse_config(config_json).map_err(to_py_err)?;
        Ok(Experiment { cfg })
    }

    /// Parse an experiment from a JSON config file.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let cfg = mflqr::config::load_config(std::path::Path::new(path)).map_err(to_py_err)?;
        Ok(Experiment { cfg })
    }

    /// The bundled scalar leader/100-follower reference experiment.
    #[staticmethod]
    #[pyo3(signature = (infinite=false))]
    fn example1(infinite: bool) -> PyResult<Self> {
        let cfg = cli::example1_config(infinite, None).map_err(to_py_err)?;
        Ok(Experiment { cfg })
    }

    #[getter]
    fn n(&self) -> usize {
        self.cfg.model.dims.n
    }

    #[getter]
    fn d_x(&self) -> usize {
        self.cfg.model.dims.d_x
    }

    #[getter]
    fn d_u(&self) -> usize {
        self.cfg.model.dims.d_u
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.cfg.seed
    }

    #[getter]
    fn horizon(&self) -> String {
        match self.cfg.cost.horizon {
            Horizon::Finite { t } => format!("finite({t})"),
            Horizon::Infinite { beta } => format!("infinite(beta={beta})"),
        }
    }

    /// Run the assumption checks. Returns {passed, checks: [...], notes}.
    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let report = validate(&self.cfg.model, &self.cfg.cost).map_err(to_py_err)?;
        let out = PyDict::new(py);
        out.set_item("passed", report.all_passed())?;
        out.set_item("leaderless", report.leaderless)?;
        let checks: Vec<_> = report
            .checks
            .iter()
            .map(|c| -> PyResult<Bound<'py, PyDict>> {
                let row = PyDict::new(py);
                row.set_item("name", &c.name)?;
                row.set_item("passed", c.passed)?;
                row.set_item("witness", c.witness.as_deref())?;
                Ok(row)
            })
            .collect::<PyResult<_>>()?;
        out.set_item("checks", checks)?;
        out.set_item("notes", &report.notes)?;
        Ok(out)
    }

    /// Solve the Riccati equations; returns the same document as the CLI
    /// `gains` subcommand (schedule, diagnostics, consensus coefficients).
    fn gains<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let payload = cli::gains_report(&self.cfg).map_err(to_py_err)?;
        json_to_py(py, &payload)
    }

    /// Roll out the closed loop under the optimal gains. Returns per-stage
    /// arrays plus both cost evaluations.
    #[pyo3(signature = (steps=None, seed=None))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        steps: Option<usize>,
        seed: Option<u64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let steps = steps.unwrap_or(match self.cfg.cost.horizon {
            Horizon::Finite { t } => t,
            Horizon::Infinite { .. } => 100,
        });
        let seed = seed.unwrap_or(self.cfg.seed);
        let sol = mflqr::riccati::solve(&self.cfg.model, &self.cfg.cost).map_err(to_py_err)?;
        let gains =
            mflqr::gains::compute_gains(&sol, &self.cfg.model, &self.cfg.cost).map_err(to_py_err)?;
        let trace =
            sim::simulate(&self.cfg.model, &self.cfg.cost, &gains, steps, seed).map_err(to_py_err)?;

        let out = PyDict::new(py);
        out.set_item("steps", trace.steps)?;
        out.set_item("seed", seed)?;
        out.set_item("cost_direct", sim::evaluate_cost_direct(&trace, &self.cfg.cost))?;
        out.set_item(
            "cost_decomposed",
            sim::evaluate_cost_decomposed_for(&trace, &self.cfg.model, &self.cfg.cost),
        )?;
        out.set_item("deviation_residual", sim::deviation_residual(&trace, &self.cfg.model))?;
        out.set_item(
            "mean_abs_dev",
            (1..=trace.steps).map(|t| trace.mean_abs_deviation(t)).collect::<Vec<_>>(),
        )?;
        out.set_item("stage_costs", &trace.stage_costs)?;
        let columns = |mats: &[nalgebra::DVector<f64>]| -> Vec<Vec<f64>> {
            mats.iter().map(|v| v.iter().copied().collect()).collect()
        };
        out.set_item("leader_states", columns(&trace.leader_states))?;
        out.set_item("leader_actions", columns(&trace.leader_actions))?;
        out.set_item("meanfield", columns(&trace.meanfield))?;
        // Follower states per stage: n rows of d_x entries.
        let followers: Vec<Vec<Vec<f64>>> = trace
            .follower_states
            .iter()
            .map(|m| {
                (0..m.ncols())
                    .map(|j| m.column(j).iter().copied().collect())
                    .collect()
            })
            .collect();
        out.set_item("follower_states", followers)?;
        out.set_item("trace_csv", sim::trace_to_csv(&trace))?;
        Ok(out)
    }

    /// Compare against the brute-force centralized solution at team size `n`
    /// (defaults to the config's n); same document as CLI `oracle-check`.
    #[pyo3(signature = (n=None))]
    fn oracle_check<'py>(&self, py: Python<'py>, n: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
        let payload = cli::oracle_report(&self.cfg, n.unwrap_or(self.cfg.model.dims.n))
            .map_err(to_py_err)?;
        json_to_py(py, &payload)
    }
}

/// One step of the backward value recursion:
/// `A^T M A - A^T M B (B^T M B + R)^{-1} B^T M A + Q`.
#[pyfunction]
fn backward_step(
    m_next: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
) -> PyResult<Vec<Vec<f64>>> {
    let m = mflqr::riccati::backward_step(
        &matrix_from("m_next", m_next)?,
        &matrix_from("a", a)?,
        &matrix_from("b", b)?,
        &matrix_from("q", q)?,
        &matrix_from("r", r)?,
    )
    .map_err(to_py_err)?;
    Ok(to_nested(&m))
}

/// Solve the discounted algebraic Riccati equation by value iteration.
/// Returns (m, iterations, residual).
#[pyfunction]
#[pyo3(signature = (a, b, q, r, beta=1.0))]
fn solve_are(
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    beta: f64,
) -> PyResult<(Vec<Vec<f64>>, usize, f64)> {
    let (m, diag) = mflqr::riccati::solve_are(
        &matrix_from("a", a)?,
        &matrix_from("b", b)?,
        &matrix_from("q", q)?,
        &matrix_from("r", r)?,
        beta,
    )
    .map_err(to_py_err)?;
    Ok((to_nested(&m), diag.iterations, diag.residual))
}

/// Stationary feedback from a fixed-point value matrix:
/// `-(B^T M B + R/beta)^{-1} B^T M A`.
#[pyfunction]
#[pyo3(signature = (m, a, b, r, beta=1.0))]
fn stationary_gain(
    m: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    beta: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let g = mflqr::gains::stationary_gain_from(
        &matrix_from("m", m)?,
        &matrix_from("a", a)?,
        &matrix_from("b", b)?,
        &matrix_from("r", r)?,
        beta,
    )
    .map_err(to_py_err)?;
    Ok(to_nested(&g))
}

#[pymodule]
fn mflqr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Experiment>()?;
    m.add_function(wrap_pyfunction!(backward_step, m)?)?;
    m.add_function(wrap_pyfunction!(solve_are, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_gain, m)?)?;
    Ok(())
}
