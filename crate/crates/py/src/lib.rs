//! Python bindings: tree-form problems, regret accounting, parameter
//! selection, single lower-bound runs and the config runner.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use swapreg::cli;
use swapreg::learners::LearnerKind;
use swapreg::lowerbound::{failure_bound, select_parameters as select, NormalFormAdversarySpec, DEFAULT_N_CAP};
use swapreg::reduction::{run_pipeline, PipelineConfig};
use swapreg::regret::{self, Transcript};
use swapreg::treeform::format::{parse_problem, write_problem};
use swapreg::treeform::DEFAULT_ENUMERATION_CAP;
use swapreg::{Error, MixedStrategy, PureStrategy, TreeFormProblem, UtilityVector};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::NoConvergence { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "TreeFormProblem", frozen)]
struct PyProblem {
    inner: Arc<TreeFormProblem>,
}

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn fig1(d: usize, n: usize) -> PyResult<Self> {
        Self::wrap(TreeFormProblem::fig1(d, n))
    }

    #[staticmethod]
    fn simplex(k: usize) -> PyResult<Self> {
        Self::wrap(TreeFormProblem::simplex(k))
    }

    /// Parses the text problem format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Self::wrap(parse_problem(text))
    }

    fn to_text(&self) -> String {
        write_problem(&self.inner)
    }

    #[getter]
    fn terminal_count(&self) -> usize {
        self.inner.terminal_count()
    }

    #[getter]
    fn strategy_count(&self) -> u128 {
        self.inner.strategy_count()
    }

    /// All pure strategies as 0/1 realization lists.
    #[pyo3(signature = (cap = DEFAULT_ENUMERATION_CAP))]
    fn pure_strategies(&self, cap: usize) -> PyResult<Vec<Vec<u8>>> {
        let xs = self.inner.enumerate_pure_strategies(cap).map_err(py_err)?;
        Ok(xs.iter().map(PureStrategy::realization).collect())
    }

    /// `(argmax realization, value)` of `<x, g>`.
    fn best_response(&self, g: Vec<f64>) -> PyResult<(Vec<u8>, f64)> {
        let (x, v) = self.inner.best_response(&g).map_err(py_err)?;
        Ok((x.realization(), v))
    }

    fn is_valid_strategy(&self, x: Vec<u8>) -> PyResult<bool> {
        self.inner.validate_realization(&x).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "TreeFormProblem(terminals={}, strategies={})",
            self.inner.terminal_count(),
            self.inner.strategy_count()
        )
    }
}

impl PyProblem {
    fn wrap(p: swapreg::Result<TreeFormProblem>) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(p.map_err(py_err)?),
        })
    }
}

/// `rounds[t]` is a list of `(realization, probability)`; `utilities[t]` the
/// round's utility vector.
fn transcript(problem: &PyProblem, rounds: Vec<Vec<(Vec<u8>, f64)>>, utilities: Vec<Vec<f64>>) -> PyResult<Transcript> {
    if rounds.len() != utilities.len() {
        return Err(PyValueError::new_err("rounds and utilities differ in length"));
    }
    let mut tr = Transcript::new(problem.inner.clone());
    for (pi, u) in rounds.into_iter().zip(utilities) {
        let entries = pi
            .into_iter()
            .map(|(x, p)| Ok((PureStrategy::from_realization(&x)?, p)))
            .collect::<swapreg::Result<Vec<_>>>()
            .map_err(py_err)?;
        let pi = MixedStrategy::new(entries).map_err(py_err)?;
        tr.push(pi, UtilityVector::new(u).map_err(py_err)?).map_err(py_err)?;
    }
    Ok(tr)
}

#[pyfunction]
fn swap_regret(problem: &PyProblem, rounds: Vec<Vec<(Vec<u8>, f64)>>, utilities: Vec<Vec<f64>>) -> PyResult<f64> {
    let tr = transcript(problem, rounds, utilities)?;
    Ok(regret::swap_regret(&tr).map_err(py_err)?.0)
}

#[pyfunction]
fn external_regret(problem: &PyProblem, rounds: Vec<Vec<(Vec<u8>, f64)>>, utilities: Vec<Vec<f64>>) -> PyResult<f64> {
    let tr = transcript(problem, rounds, utilities)?;
    regret::external_regret(&tr).map_err(py_err)
}

/// `eps`, `n` and `delta` for the embedding with `d` rows and `m` actions.
#[pyfunction]
#[pyo3(signature = (c, d, m, n_cap = DEFAULT_N_CAP))]
fn select_parameters<'py>(py: Python<'py>, c: f64, d: usize, m: usize, n_cap: u64) -> PyResult<Bound<'py, PyDict>> {
    let p = select(c, d, m, n_cap).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("eps", p.eps)?;
    out.set_item("n", p.n)?;
    out.set_item("delta", p.delta)?;
    Ok(out)
}

/// One learner-vs-embedded-adversary run with the full reduction report.
#[pyfunction]
#[pyo3(signature = (d, n, m, horizon, eps, seed = 0, learner = "hedge", pool_size = 64, pool_growth = true))]
#[allow(clippy::too_many_arguments)]
fn run_lowerbound<'py>(
    py: Python<'py>,
    d: usize,
    n: usize,
    m: usize,
    horizon: usize,
    eps: f64,
    seed: u64,
    learner: &str,
    pool_size: usize,
    pool_growth: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = PipelineConfig {
        spec: NormalFormAdversarySpec::even(d, m).map_err(py_err)?,
        n,
        horizon,
        eps,
        delta: failure_bound(m, n, eps),
        learner: learner.parse::<LearnerKind>().map_err(py_err)?,
        rate: None,
        pool_size,
        pool_growth,
        advance_prob: None,
    };
    let o = py.detach(|| run_pipeline(&cfg, seed)).map_err(py_err)?;
    let r = &o.report;
    let out = PyDict::new(py);
    out.set_item("W", r.w)?;
    out.set_item("F_holds", r.f_holds)?;
    out.set_item("V_id", r.v_id)?;
    out.set_item("Vbar_id", r.vbar_id)?;
    out.set_item("V_phi", r.v_phi)?;
    out.set_item("Vbar_phibar", r.vbar_phibar)?;
    out.set_item("swap_regret", r.swap_regret)?;
    out.set_item("external_regret", o.external_regret)?;
    out.set_item("chain_i_ok", r.chain_i.ok())?;
    out.set_item("chain_ii_ok", r.chain_ii.ok())?;
    out.set_item("chain_iii_ok", r.chain_iii.ok())?;
    out.set_item("eps_violations", r.epsilon_violations)?;
    out.set_item("actions", o.actions.clone())?;
    Ok(out)
}

/// Runs a config file as the `swapreg run` command does; returns the list of
/// failed checks (empty when everything held).
#[pyfunction]
#[pyo3(signature = (path, seeds = None, out = None, jobs = 1))]
fn run_config(py: Python<'_>, path: PathBuf, seeds: Option<String>, out: Option<PathBuf>, jobs: usize) -> PyResult<Vec<String>> {
    let summary = py
        .detach(|| cli::run_file(&path, seeds.as_deref(), out.as_deref(), jobs))
        .map_err(|e| match e.stage {
            cli::Stage::Validation => PyValueError::new_err(e.to_string()),
            cli::Stage::Runtime => PyRuntimeError::new_err(e.to_string()),
        })?;
    Ok(summary.failures)
}

#[pymodule]
fn pyswapreg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(swap_regret, m)?)?;
    m.add_function(wrap_pyfunction!(external_regret, m)?)?;
    m.add_function(wrap_pyfunction!(select_parameters, m)?)?;
    m.add_function(wrap_pyfunction!(run_lowerbound, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
