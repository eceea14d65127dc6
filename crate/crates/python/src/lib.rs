//! Python bindings. State numbers are 0-based here, as in the Rust API.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use switchdex::joint::{gap_metrics, JointMdp, TieRule};
use switchdex::verify::{run_verify, VerifyLevel};
use switchdex::{AugmentedState, CostModel, Error, InstanceEnsembleConfig, Matrix};

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// One project: transition matrix, active rewards, startup and shutdown
/// costs, discount factor.
#[pyclass(name = "ProjectSpec", module = "switchdex", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProjectSpec {
    inner: switchdex::ProjectSpec,
}

#[pymethods]
impl PyProjectSpec {
    #[new]
    #[pyo3(signature = (transition, reward, startup_cost=None, shutdown_cost=None, beta=0.9))]
    fn new(
        transition: Vec<Vec<f64>>,
        reward: Vec<f64>,
        startup_cost: Option<Vec<f64>>,
        shutdown_cost: Option<Vec<f64>>,
        beta: f64,
    ) -> PyResult<Self> {
        let n = reward.len();
        let p = Matrix::from_rows(&transition).map_err(to_py)?;
        let inner = switchdex::ProjectSpec::new(
            p,
            reward,
            startup_cost.unwrap_or_else(|| vec![0.0; n]),
            shutdown_cost.unwrap_or_else(|| vec![0.0; n]),
            beta,
        );
        let violations = inner.validate();
        if !violations.is_empty() {
            return Err(to_py(Error::InvalidSpec(violations)));
        }
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn transition(&self) -> Vec<Vec<f64>> {
        self.inner.transition.to_rows()
    }

    #[getter]
    fn reward(&self) -> Vec<f64> {
        self.inner.reward.clone()
    }

    #[getter]
    fn startup_cost(&self) -> Vec<f64> {
        self.inner.startup_cost.clone()
    }

    #[getter]
    fn shutdown_cost(&self) -> Vec<f64> {
        self.inner.shutdown_cost.clone()
    }

    /// Equivalent project with zero shutdown costs.
    fn normalize(&self) -> PyResult<Self> {
        let norm = self.inner.normalize().map_err(to_py)?;
        Ok(Self { inner: norm.into() })
    }

    fn with_costs(&self, startup_cost: Vec<f64>, shutdown_cost: Vec<f64>) -> PyResult<Self> {
        let inner = self.inner.with_costs(startup_cost, shutdown_cost);
        let violations = inner.validate();
        if !violations.is_empty() {
            return Err(to_py(Error::InvalidSpec(violations)));
        }
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!("ProjectSpec(n={}, beta={})", self.inner.n(), self.inner.beta)
    }
}

/// Continuation and switching index of every state.
#[pyclass(name = "IndexTable", module = "switchdex", frozen, skip_from_py_object)]
struct PyIndexTable {
    inner: switchdex::IndexTable,
}

#[pymethods]
impl PyIndexTable {
    #[getter]
    fn nu_cont(&self) -> Vec<f64> {
        self.inner.nu_cont.clone()
    }

    #[getter]
    fn nu_switch(&self) -> Vec<f64> {
        self.inner.nu_switch.clone()
    }

    #[getter]
    fn order_cont(&self) -> Vec<usize> {
        self.inner.order_cont.clone()
    }

    #[getter]
    fn order_switch(&self) -> Vec<usize> {
        self.inner.order_switch.clone()
    }

    #[getter]
    fn op_count_stage1(&self) -> u64 {
        self.inner.op_count_stage1
    }

    #[getter]
    fn op_count_stage2(&self) -> u64 {
        self.inner.op_count_stage2
    }

    /// Index of `state` when the project was (`prev_active=True`) or was not
    /// engaged in the previous period.
    fn index(&self, prev_active: bool, state: usize) -> PyResult<f64> {
        if state >= self.inner.n() {
            return Err(PyValueError::new_err(format!("state {state} out of range")));
        }
        Ok(self.inner.index(AugmentedState::new(prev_active, state)))
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("IndexTable(n={})", self.inner.n())
    }
}

/// Two-stage computation of both indices.
#[pyfunction]
fn compute_index_table(spec: PyRef<'_, PyProjectSpec>) -> PyResult<PyIndexTable> {
    let inner = switchdex::compute_index_table(&spec.inner).map_err(to_py)?;
    Ok(PyIndexTable { inner })
}

/// Both indices through the doubled-state project.
#[pyfunction]
fn at_index_table(spec: PyRef<'_, PyProjectSpec>) -> PyResult<PyIndexTable> {
    let inner = switchdex::at_index_table(&spec.inner).map_err(to_py)?;
    Ok(PyIndexTable { inner })
}

#[pyfunction]
fn gittins_index(spec: PyRef<'_, PyProjectSpec>) -> PyResult<Vec<f64>> {
    switchdex::gittins_index(&spec.inner).map_err(to_py)
}

/// Index of one state by enumerating every active set (small projects only).
#[pyfunction]
fn brute_force_index(spec: PyRef<'_, PyProjectSpec>, prev_active: bool, state: usize) -> PyResult<f64> {
    let norm = spec.inner.normalize().map_err(to_py)?;
    switchdex::brute_force_index(&norm, prev_active, state).map_err(to_py)
}

fn cost_model(obj: Option<&Bound<'_, PyAny>>) -> PyResult<CostModel> {
    let Some(obj) = obj else {
        return Ok(CostModel::ZERO);
    };
    if let Ok(s) = obj.extract::<String>() {
        if s.eq_ignore_ascii_case("uniform") {
            return Ok(CostModel::Uniform01);
        }
        return Err(PyValueError::new_err(format!("unknown cost model `{s}`")));
    }
    if let Ok(v) = obj.extract::<f64>() {
        return Ok(CostModel::Constant(v));
    }
    let v: Vec<f64> = obj.extract()?;
    Ok(CostModel::PerProjectConstant(v))
}

/// Instance `k` of a seeded ensemble. Costs are a constant, `"uniform"`, or
/// one constant per project.
#[pyfunction]
#[pyo3(signature = (projects, states, seed, k=0, beta=0.9, startup=None, shutdown=None))]
fn generate_instance(
    projects: usize,
    states: usize,
    seed: u64,
    k: usize,
    beta: f64,
    startup: Option<&Bound<'_, PyAny>>,
    shutdown: Option<&Bound<'_, PyAny>>,
) -> PyResult<Vec<PyProjectSpec>> {
    let mut cfg = InstanceEnsembleConfig::new(projects, states, seed, k + 1, beta);
    cfg.startup = cost_model(startup)?;
    cfg.shutdown = cost_model(shutdown)?;
    let specs = switchdex::generate_instance(&cfg, k).map_err(to_py)?;
    Ok(specs.into_iter().map(|inner| PyProjectSpec { inner }).collect())
}

/// Solve the joint problem and score the index policy and the Gittins
/// benchmark against it.
#[pyfunction]
fn policy_gap<'py>(py: Python<'py>, specs: Vec<PyRef<'py, PyProjectSpec>>) -> PyResult<Bound<'py, PyDict>> {
    let specs: Vec<switchdex::ProjectSpec> = specs.iter().map(|s| s.inner.clone()).collect();
    let mdp = JointMdp::new(&specs).map_err(to_py)?;
    let opt = mdp.solve_optimal().map_err(to_py)?;
    let tables = specs
        .iter()
        .map(switchdex::compute_index_table)
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let bench = specs
        .iter()
        .map(|s| switchdex::gittins_index(&s.underlying()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let v_mpi = mdp
        .evaluate_priority_policy(|m, a| tables[m].index(a), TieRule::IncumbentFirst)
        .map_err(to_py)?
        .scalar;
    let v_bench = mdp
        .evaluate_priority_policy(|m, a| bench[m][a.state], TieRule::IncumbentFirst)
        .map_err(to_py)?
        .scalar;
    let gap = gap_metrics(opt.value.scalar, v_mpi, v_bench).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("v_opt", opt.value.scalar)?;
    out.set_item("v_mpi", v_mpi)?;
    out.set_item("v_bench", v_bench)?;
    out.set_item("delta", gap.delta)?;
    out.set_item("rho", gap.rho)?;
    out.set_item("equivalent", gap.equivalent)?;
    Ok(out)
}

#[pyfunction]
fn load_instance(path: &str) -> PyResult<Vec<PyProjectSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| to_py(e.into()))?;
    let specs = switchdex::io::read_instance_json(&text).map_err(to_py)?;
    Ok(specs.into_iter().map(|inner| PyProjectSpec { inner }).collect())
}

#[pyfunction]
fn save_instance(path: &str, specs: Vec<PyRef<'_, PyProjectSpec>>) -> PyResult<()> {
    let specs: Vec<switchdex::ProjectSpec> = specs.iter().map(|s| s.inner.clone()).collect();
    let mut buf = Vec::new();
    switchdex::io::write_instance_json(&mut buf, &specs).map_err(to_py)?;
    std::fs::write(path, buf).map_err(|e| to_py(e.into()))
}

/// Run the self-check suites; returns `(name, passed, checks, max_error)`.
#[pyfunction]
#[pyo3(signature = (level="fast", seed=1))]
fn verify(level: &str, seed: u64) -> PyResult<Vec<(String, bool, usize, f64)>> {
    let level = match level {
        "fast" => VerifyLevel::Fast,
        "full" => VerifyLevel::Full,
        other => return Err(PyValueError::new_err(format!("level must be fast or full, not {other}"))),
    };
    let report = run_verify(level, seed).map_err(to_py)?;
    Ok(report
        .suites
        .iter()
        .map(|s| (s.name.to_string(), s.passed(), s.checked, s.max_error))
        .collect())
}

#[pymodule]
#[pyo3(name = "switchdex")]
fn switchdex_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProjectSpec>()?;
    m.add_class::<PyIndexTable>()?;
    m.add_function(wrap_pyfunction!(compute_index_table, m)?)?;
    m.add_function(wrap_pyfunction!(at_index_table, m)?)?;
    m.add_function(wrap_pyfunction!(gittins_index, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_index, m)?)?;
    m.add_function(wrap_pyfunction!(generate_instance, m)?)?;
    m.add_function(wrap_pyfunction!(policy_gap, m)?)?;
    m.add_function(wrap_pyfunction!(load_instance, m)?)?;
    m.add_function(wrap_pyfunction!(save_instance, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
