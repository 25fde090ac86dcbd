//! Python bindings for the `tabsa` simulator.
//!
//! Configuration objects cross the boundary as JSON strings, which keeps the
//! Python side free of schema duplication: `json.dumps(cfg)` in, `json.loads`
//! out.

use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tabsa::agents::{AgentSpec, DecisionAgent};
use tabsa::bench::{self, BenchmarkPlan, EvalSpec};
use tabsa::determinism;
use tabsa::dqn::{self, Mlp, TrainConfig};
use tabsa::engine::{Scenario, ScenarioConfig};
use tabsa::eval::{StatEval, StatParams};
use tabsa::geom::Point;
use tabsa::navgrid::OccupancyView;
use tabsa::tasks::{self, TaskGenParams};
use tabsa::worldgen::{self, EnvParams, EnvironmentMap};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_or_default<T: serde::de::DeserializeOwned + Default>(json: Option<&str>) -> PyResult<T> {
    match json {
        Some(s) => serde_json::from_str(s).map_err(value_err),
        None => Ok(T::default()),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(runtime_err)
}

/// Derive a child seed from `parent` and a text label.
#[pyfunction]
fn split_seed(parent: u64, label: &str) -> PyResult<u64> {
    determinism::split(parent, label).map_err(value_err)
}

/// A generated indoor map.
#[pyclass(name = "EnvironmentMap", frozen)]
struct PyMap {
    inner: Arc<EnvironmentMap>,
}

#[pymethods]
impl PyMap {
    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows
    }

    #[getter]
    fn resolution(&self) -> f64 {
        self.inner.resolution
    }

    #[getter]
    fn diagonal(&self) -> f64 {
        self.inner.diagonal()
    }

    #[getter]
    fn room_count(&self) -> usize {
        self.inner.rooms.len()
    }

    #[getter]
    fn object_count(&self) -> usize {
        self.inner.objects.len()
    }

    fn is_free(&self, col: usize, row: usize) -> bool {
        col < self.inner.cols && row < self.inner.rows && self.inner.is_free(tabsa::Cell::new(col, row))
    }

    /// Shortest collision-free path between two points in meters, or `None`.
    fn plan_path(&self, start: (f64, f64), goal: (f64, f64)) -> Option<Vec<(f64, f64)>> {
        let view = OccupancyView::new(self.inner.clone());
        view.plan_path(Point::new(start.0, start.1), Point::new(goal.0, goal.1))
            .ok()
            .map(|p| p.waypoints.iter().map(|w| (w.x, w.y)).collect())
    }

    fn path_length(&self, start: (f64, f64), goal: (f64, f64)) -> f64 {
        OccupancyView::new(self.inner.clone()).path_length(Point::new(start.0, start.1), Point::new(goal.0, goal.1))
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(runtime_err)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let map = EnvironmentMap::from_json(s).map_err(value_err)?;
        Ok(Self { inner: Arc::new(map) })
    }

    #[pyo3(signature = (scale = 40.0))]
    fn to_svg(&self, scale: f64) -> String {
        self.inner.to_svg(scale)
    }

    fn __repr__(&self) -> String {
        format!(
            "EnvironmentMap({}x{} cells, {} rooms, {} objects)",
            self.inner.cols,
            self.inner.rows,
            self.inner.rooms.len(),
            self.inner.objects.len()
        )
    }
}

/// Generate a map from optional `EnvParams` JSON.
#[pyfunction]
#[pyo3(signature = (seed, params = None))]
fn generate_environment(seed: u64, params: Option<&str>) -> PyResult<PyMap> {
    let params: EnvParams = parse_or_default(params)?;
    let map = worldgen::generate_environment(&params, seed).map_err(value_err)?;
    Ok(PyMap { inner: Arc::new(map) })
}

/// Generate the task list for `map` and return it as JSON.
#[pyfunction]
#[pyo3(signature = (map, seed, params = None))]
fn generate_tasks(map: &PyMap, seed: u64, params: Option<&str>) -> PyResult<String> {
    let params: TaskGenParams = parse_or_default(params)?;
    let list = tasks::generate_tasks(&params, &map.inner, seed).map_err(value_err)?;
    to_json(&list)
}

/// One scenario driven step by step from Python.
#[pyclass(name = "Scenario", unsendable)]
struct PyScenario {
    scenario: Scenario,
    agent: Box<dyn DecisionAgent + Send>,
    eval: StatEval,
}

#[pymethods]
impl PyScenario {
    /// `config` is `ScenarioConfig` JSON, `agent` an agent spec such as
    /// `{"agent": "distance", "ratio": 0.5}`.
    #[new]
    #[pyo3(signature = (agent, config = None, seed = None))]
    fn new(agent: &str, config: Option<&str>, seed: Option<u64>) -> PyResult<Self> {
        let mut cfg: ScenarioConfig = parse_or_default(config)?;
        if let Some(s) = seed {
            cfg = cfg.with_seed(s);
        }
        let spec: AgentSpec = serde_json::from_str(agent).map_err(value_err)?;
        let scenario = Scenario::new(&cfg).map_err(value_err)?;
        let agent = spec
            .build(scenario.seeds.agent_seed, scenario.map().diagonal())
            .map_err(value_err)?;
        Ok(Self {
            scenario,
            agent,
            eval: StatEval::new(StatParams::default()),
        })
    }

    /// Advance one step. Returns the outcome name once the scenario ends.
    fn step(&mut self) -> Option<&'static str> {
        self.scenario
            .step(self.agent.as_mut(), &mut self.eval)
            .map(|o| o.name())
    }

    /// Step until the scenario ends and return the outcome as JSON.
    fn run(&mut self) -> PyResult<String> {
        let outcome = self.scenario.run(self.agent.as_mut(), &mut self.eval);
        to_json(&outcome)
    }

    #[getter]
    fn now(&self) -> f64 {
        self.scenario.now
    }

    #[getter]
    fn step_count(&self) -> u64 {
        self.scenario.step_count
    }

    #[getter]
    fn robot_position(&self) -> (f64, f64) {
        (self.scenario.robot.pose.x, self.scenario.robot.pose.y)
    }

    #[getter]
    fn outcome(&self) -> Option<&'static str> {
        self.scenario.outcome().map(|o| o.name())
    }

    #[getter]
    fn completed(&self) -> usize {
        self.scenario.completed_count()
    }

    /// Ids of the called, not yet completed tasks.
    fn jobs(&self) -> Vec<u32> {
        self.scenario.jobs.iter().map(|id| id.0).collect()
    }

    fn tasks_json(&self) -> PyResult<String> {
        to_json(&self.scenario.tasks)
    }

    fn stats_json(&self) -> PyResult<String> {
        to_json(&self.eval.record)
    }

    fn trace_hash(&self) -> String {
        self.scenario.trace_hash()
    }
}

/// Run one configured scenario (`RunConfig` JSON) and return its report.
#[pyfunction]
fn run(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg: bench::RunConfig = serde_json::from_str(config).map_err(value_err)?;
    let report = py
        .detach(|| bench::run_single(&cfg.scenario, &cfg.agent, &cfg.eval))
        .map_err(runtime_err)?;
    to_json(&serde_json::json!({
        "outcome": report.outcome,
        "stats": report.stats,
        "total_reward": report.total_reward,
    }))
}

/// Run a benchmark plan and return the per-run summaries as JSON.
#[pyfunction]
#[pyo3(signature = (plan, jobs = 1))]
fn run_batch(py: Python<'_>, plan: &str, jobs: usize) -> PyResult<String> {
    let plan: BenchmarkPlan = serde_json::from_str(plan).map_err(value_err)?;
    let summaries = py.detach(|| bench::run_batch(&plan, jobs)).map_err(runtime_err)?;
    to_json(&summaries)
}

/// Per-agent aggregate of a summaries JSON document.
#[pyfunction]
fn aggregate(summaries: &str) -> PyResult<String> {
    let runs: Vec<bench::RunSummary> = serde_json::from_str(summaries).map_err(value_err)?;
    to_json(&bench::aggregate(&runs))
}

/// A fully connected ReLU network.
#[pyclass(name = "Network")]
struct PyNetwork {
    inner: Mlp,
}

#[pymethods]
impl PyNetwork {
    #[new]
    #[pyo3(signature = (sizes, seed = 0))]
    fn new(sizes: Vec<usize>, seed: u64) -> PyResult<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(PyValueError::new_err("need at least two non-zero layer sizes"));
        }
        let mut stream = determinism::Stream::new(seed);
        Ok(Self {
            inner: Mlp::random(&sizes, &mut stream),
        })
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.inner.sizes().to_vec()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.forward(&x).map_err(value_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save_file(path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = Mlp::load_file(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }
}

/// Train a DQN agent. Returns the network and the per-episode rewards.
#[pyfunction]
#[pyo3(signature = (episodes, config = None))]
fn train_dqn(py: Python<'_>, episodes: usize, config: Option<&str>) -> PyResult<(PyNetwork, Vec<f64>)> {
    if episodes == 0 {
        return Err(PyValueError::new_err("episodes must be at least 1"));
    }
    let cfg: TrainConfig = parse_or_default(config)?;
    let (net, curve) = py.detach(|| dqn::train(&cfg, episodes)).map_err(runtime_err)?;
    let rewards = curve.iter().map(|e| e.total_reward).collect();
    Ok((PyNetwork { inner: net }, rewards))
}

/// Default eval spec as JSON, handy as a template.
#[pyfunction]
fn default_eval_spec() -> PyResult<String> {
    to_json(&EvalSpec::default())
}

#[pymodule]
fn tabsa_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMap>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(split_seed, m)?)?;
    m.add_function(wrap_pyfunction!(generate_environment, m)?)?;
    m.add_function(wrap_pyfunction!(generate_tasks, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_batch, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(train_dqn, m)?)?;
    m.add_function(wrap_pyfunction!(default_eval_spec, m)?)?;
    Ok(())
}
