//! Python bindings: configs, the traffic environment, learners and the
//! experiment runners.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use qcombo_core::agent_io::{pagerank_weights, DEFAULT_DAMPING, OBS_DIM};
use qcombo_core::harness::{self, ExperimentConfig, MetricRecord, ReferencePolicy, TrafficEnv};
use qcombo_core::neural::Checkpoint;
use qcombo_core::sim::RoadNetwork;
use rand_chacha::ChaCha8Rng;

fn err(e: qcombo_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn obs_rows(obs: &[[f64; OBS_DIM]]) -> Vec<Vec<f64>> {
    obs.iter().map(|o| o.to_vec()).collect()
}

fn obs_arrays(rows: &[Vec<f64>]) -> PyResult<Vec<[f64; OBS_DIM]>> {
    rows.iter()
        .map(|o| <[f64; OBS_DIM]>::try_from(o.as_slice()).map_err(|_| PyValueError::new_err(format!("observations have {OBS_DIM} entries"))))
        .collect()
}

fn records_to_py<'py>(py: Python<'py>, records: &[MetricRecord]) -> PyResult<Vec<Bound<'py, PyDict>>> {
    records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("segment", r.segment)?;
            d.set_item("step", r.step)?;
            d.set_item("global_reward", r.global_reward)?;
            d.set_item("mean_reward", r.mean_reward)?;
            d.set_item("mean_queue", r.mean_queue)?;
            d.set_item("mean_wait", r.mean_wait)?;
            d.set_item("mean_delay", r.mean_delay)?;
            d.set_item("epsilon", r.epsilon)?;
            d.set_item("phases", r.phase_list())?;
            Ok(d)
        })
        .collect()
}

/// Experiment configuration (grid, flows, schedule, learner, run).
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    /// Default schedule and learner on a grid with one constant flow period.
    #[new]
    fn new(rows: usize, cols: usize, horizontal: Vec<u32>, vertical: Vec<u32>) -> PyResult<Self> {
        let inner = ExperimentConfig::new(rows, cols, horizontal, vertical);
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        ExperimentConfig::load(&path).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ExperimentConfig::from_toml(text).map(|inner| Self { inner }).map_err(err)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.grid.rows
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.grid.cols
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.run.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.run.seed = seed;
    }

    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.learner.algorithm.name()
    }

    #[setter]
    fn set_algorithm(&mut self, name: &str) -> PyResult<()> {
        self.inner.learner.algorithm = name.parse().map_err(err)?;
        Ok(())
    }

    #[getter]
    fn horizon(&self) -> u64 {
        self.inner.schedule.horizon
    }

    /// Sets the schedule in seconds; checked against the flow program.
    fn set_schedule(&mut self, horizon: u64, warmup: u64, train_steps: u64, eval_steps: u64, record_last: u64) -> PyResult<()> {
        let mut next = self.inner.clone();
        let s = &mut next.schedule;
        (s.horizon, s.warmup, s.train_steps, s.eval_steps, s.record_last) = (horizon, warmup, train_steps, eval_steps, record_last);
        if let Some(last) = next.flow.periods.last_mut() {
            last.end = last.end.max(horizon);
        }
        next.validate().map_err(err)?;
        self.inner = next;
        Ok(())
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!("Config({}x{}, {}, seed={})", c.grid.rows, c.grid.cols, c.learner.algorithm, c.run.seed)
    }
}

/// The signalized grid, stepped one decision (5 s) at a time.
#[pyclass(name = "Env")]
struct PyEnv {
    inner: TrafficEnv,
}

#[pymethods]
impl PyEnv {
    #[new]
    fn new(config: &PyConfig) -> PyResult<Self> {
        TrafficEnv::new(&config.inner).map(|inner| Self { inner }).map_err(err)
    }

    #[getter]
    fn agents(&self) -> usize {
        self.inner.agents()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    #[getter]
    fn time_step(&self) -> u64 {
        self.inner.time_step()
    }

    fn observation(&self) -> Vec<Vec<f64>> {
        obs_rows(self.inner.observation())
    }

    /// Applies one action per light (0 keep, 1 switch) and returns
    /// `(rewards, global_reward, next_observation)`.
    fn step(&mut self, actions: Vec<usize>) -> PyResult<(Vec<f64>, f64, Vec<Vec<f64>>)> {
        let t = self.inner.step(&actions).map_err(err)?;
        Ok((t.rewards, t.global_reward, obs_rows(&t.next_obs)))
    }
}

/// A trained or freshly initialized learner of any supported algorithm.
#[pyclass(name = "Learner")]
struct PyLearner {
    inner: qcombo_core::algorithms::Learner,
    rng: ChaCha8Rng,
}

#[pymethods]
impl PyLearner {
    #[new]
    fn new(config: &PyConfig) -> PyResult<Self> {
        let inner = harness::build_learner(&config.inner).map_err(err)?;
        Ok(Self { inner, rng: harness::seeded(config.inner.run.seed, 99) })
    }

    /// Restores a checkpoint for the grid described by `config`.
    #[staticmethod]
    fn load(path: PathBuf, config: &PyConfig) -> PyResult<Self> {
        let ck = Checkpoint::load(&path).map_err(err)?;
        let inner = harness::load_learner(&ck, &config.inner).map_err(err)?;
        Ok(Self { inner, rng: harness::seeded(config.inner.run.seed, 99) })
    }

    fn save(&self, path: PathBuf, seed: u64) -> PyResult<()> {
        self.inner.to_checkpoint(seed, [0; 32]).and_then(|ck| ck.save(&path)).map_err(err)
    }

    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.algorithm().name()
    }

    #[getter]
    fn agents(&self) -> usize {
        self.inner.agents()
    }

    /// Epsilon-greedy (or sampled, for actor-critic) actions per light.
    #[pyo3(signature = (observation, last_actions, epsilon = 0.0))]
    fn act(&mut self, observation: Vec<Vec<f64>>, last_actions: Vec<usize>, epsilon: f64) -> PyResult<Vec<usize>> {
        let obs = obs_arrays(&observation)?;
        self.inner.act(&obs, &last_actions, epsilon, &mut self.rng).map_err(err)
    }

    /// Per-light action values `[[keep, switch], ...]`.
    fn q_values(&self, observation: Vec<Vec<f64>>, last_actions: Vec<usize>) -> PyResult<Vec<Vec<f64>>> {
        let obs = obs_arrays(&observation)?;
        let m = self.inner.local_outputs(&obs, &last_actions).map_err(err)?;
        Ok(m.rows().into_iter().map(|r| r.to_vec()).collect())
    }
}

/// PageRank weights of an undirected graph given as adjacency lists.
#[pyfunction]
#[pyo3(signature = (adjacency, damping = DEFAULT_DAMPING))]
fn pagerank(adjacency: Vec<Vec<usize>>, damping: f64) -> PyResult<Vec<f64>> {
    pagerank_weights(&adjacency, damping).map(|w| w.as_slice().to_vec()).map_err(err)
}

/// PageRank weights of the intersections of an `rows x cols` grid.
#[pyfunction]
fn grid_weights(rows: usize, cols: usize) -> PyResult<Vec<f64>> {
    let net = RoadNetwork::build_grid(rows, cols, 400.0).map_err(err)?;
    pagerank(net.adjacency, DEFAULT_DAMPING)
}

/// Trains over the configured schedule. Returns `(records, losses_logged,
/// learner)`; files are written when `out` is given.
#[pyfunction]
#[pyo3(signature = (config, out = None))]
fn run_training<'py>(py: Python<'py>, config: &PyConfig, out: Option<PathBuf>) -> PyResult<(Vec<Bound<'py, PyDict>>, usize, PyLearner)> {
    let o = py.detach(|| harness::run_training(&config.inner, out.as_deref())).map_err(err)?;
    let learner = PyLearner { inner: o.learner, rng: harness::seeded(config.inner.run.seed, 99) };
    Ok((records_to_py(py, &o.records)?, o.losses.len(), learner))
}

/// Runs the `"static"` or `"random"` reference over the schedule.
#[pyfunction]
#[pyo3(signature = (config, policy, out = None))]
fn run_reference<'py>(py: Python<'py>, config: &PyConfig, policy: &str, out: Option<PathBuf>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let policy: ReferencePolicy = policy.parse().map_err(err)?;
    let records = py.detach(|| harness::run_reference(&config.inner, policy, out.as_deref())).map_err(err)?;
    records_to_py(py, &records)
}

/// Executes a checkpoint's local policy on the target grid's flow program.
#[pyfunction]
#[pyo3(signature = (target, checkpoint, out = None))]
fn run_transfer<'py>(py: Python<'py>, target: &PyConfig, checkpoint: PathBuf, out: Option<PathBuf>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let ck = Checkpoint::load(&checkpoint).map_err(err)?;
    let records = py.detach(|| harness::run_transfer(&target.inner, &ck, out.as_deref())).map_err(err)?;
    records_to_py(py, &records)
}

/// Mean global reward of a list of records.
#[pyfunction]
fn mean_global_reward(records: Vec<Bound<'_, PyDict>>) -> PyResult<f64> {
    let mut sum = 0.0;
    for r in &records {
        sum += r.get_item("global_reward")?.ok_or_else(|| PyValueError::new_err("record without global_reward"))?.extract::<f64>()?;
    }
    Ok(sum / records.len().max(1) as f64)
}

#[pymodule]
fn qcombo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyEnv>()?;
    m.add_class::<PyLearner>()?;
    m.add_function(wrap_pyfunction!(pagerank, m)?)?;
    m.add_function(wrap_pyfunction!(grid_weights, m)?)?;
    m.add_function(wrap_pyfunction!(run_training, m)?)?;
    m.add_function(wrap_pyfunction!(run_reference, m)?)?;
    m.add_function(wrap_pyfunction!(run_transfer, m)?)?;
    m.add_function(wrap_pyfunction!(mean_global_reward, m)?)?;
    m.add("OBS_DIM", OBS_DIM)?;
    Ok(())
}
