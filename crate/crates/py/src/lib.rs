//! Python bindings: priority trees, the replay buffer, snapshot environments,
//! the dense Q-network and the experiment harness.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use dpsr_core::environments::{self as envs, EnvConfig, EnvKind, SnapshotEnv};
use dpsr_core::experiment::{self, ExperimentSpec, SummaryRow};
use dpsr_core::q_model::{self, DenseQNet, QFunction};
use dpsr_core::replay_buffer::{DpsrBuffer, Experience, DEFAULT_PRIORITY_EPSILON};
use dpsr_core::trainer::{self, Mode};
use dpsr_core::Error;
use pyo3::exceptions::{PyIndexError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_py(err: Error) -> PyErr {
    let msg = err.to_string();
    match err {
        Error::IndexOutOfRange { .. } | Error::Slot(_) => PyIndexError::new_err(msg),
        Error::Io { .. } => PyOSError::new_err(msg),
        Error::Config { .. }
        | Error::InvalidWeight(_)
        | Error::QueryOutOfRange { .. }
        | Error::CandidateCount { .. }
        | Error::Shape { .. }
        | Error::InvalidAction { .. }
        | Error::Token(_)
        | Error::Format(_) => PyValueError::new_err(msg),
        _ => PyRuntimeError::new_err(msg),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// Array-backed sum tree over non-negative weights.
#[pyclass(name = "PrefixSumTree")]
struct PyPrefixSumTree(dpsr_core::priority_index::PrefixSumTree);

#[pymethods]
impl PyPrefixSumTree {
    #[new]
    fn new(capacity: usize) -> PyResult<Self> {
        if capacity == 0 {
            return Err(PyValueError::new_err("capacity must be at least 1"));
        }
        Ok(Self(dpsr_core::priority_index::PrefixSumTree::new(capacity)))
    }

    #[getter]
    fn capacity(&self) -> usize {
        self.0.capacity()
    }

    #[getter]
    fn total(&self) -> f64 {
        self.0.total()
    }

    fn weight(&self, index: usize) -> PyResult<f64> {
        if index >= self.0.capacity() {
            return Err(to_py(Error::IndexOutOfRange {
                index,
                capacity: self.0.capacity(),
            }));
        }
        Ok(self.0.weight(index))
    }

    fn set_weight(&mut self, index: usize, weight: f64) -> PyResult<()> {
        self.0.set_weight(index, weight).map_err(to_py)
    }

    /// Smallest index whose inclusive prefix sum exceeds `u`.
    fn find_prefix(&self, u: f64) -> PyResult<usize> {
        self.0.find_prefix(u).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.capacity()
    }
}

/// Replay buffer with prioritized sampling and prioritized replacement.
/// Draws come from a private generator seeded at construction.
#[pyclass(name = "ReplayBuffer")]
struct PyReplayBuffer {
    inner: DpsrBuffer,
    rng: ChaCha8Rng,
}

#[pymethods]
impl PyReplayBuffer {
    #[new]
    #[pyo3(signature = (capacity, alpha=0.6, gamma=0.3, seed=0, epsilon=DEFAULT_PRIORITY_EPSILON))]
    fn new(capacity: usize, alpha: f64, gamma: f64, seed: u64, epsilon: f64) -> PyResult<Self> {
        Ok(Self {
            inner: DpsrBuffer::with_epsilon(capacity, alpha, gamma, epsilon).map_err(to_py)?,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    #[getter]
    fn capacity(&self) -> usize {
        self.inner.capacity()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn is_full(&self) -> bool {
        self.inner.is_full()
    }

    /// Stores a transition and returns its slot. Without an explicit
    /// priority the current buffer maximum is used.
    #[pyo3(signature = (state, action, reward, next_state, terminal, birth_step=0, priority=None))]
    #[allow(clippy::too_many_arguments)]
    fn append(
        &mut self,
        state: Vec<f64>,
        action: usize,
        reward: f64,
        next_state: Vec<f64>,
        terminal: bool,
        birth_step: u64,
        priority: Option<f64>,
    ) -> PyResult<usize> {
        let exp = Experience {
            state,
            action,
            reward,
            next_state,
            terminal,
            snapshot: None,
            birth_step,
            priority: priority.unwrap_or_else(|| self.inner.new_experience_priority()),
        };
        self.inner.append(exp).map_err(to_py)
    }

    /// Sets a slot's priority to `|td| + epsilon`.
    fn update_priority(&mut self, slot: usize, td_error: f64) -> PyResult<()> {
        self.inner.update_priority(slot, td_error.abs()).map_err(to_py)
    }

    fn priorities(&self) -> Vec<f64> {
        self.inner.priorities().collect()
    }

    fn max_priority(&self) -> Option<f64> {
        self.inner.max_priority()
    }

    fn sample_probability(&self, slot: usize) -> PyResult<f64> {
        self.check_slot(slot)?;
        Ok(self.inner.sample_probability(slot))
    }

    fn replacement_probability(&self, slot: usize) -> PyResult<f64> {
        self.check_slot(slot)?;
        Ok(self.inner.replacement_probability(slot))
    }

    /// `k` independent draws as `(slot, importance_weight)` pairs.
    #[pyo3(signature = (k, beta, alpha=None))]
    fn sample(&mut self, k: usize, beta: f64, alpha: Option<f64>) -> PyResult<Vec<(usize, f64)>> {
        let alpha = alpha.unwrap_or(self.inner.alpha());
        let batch = self.inner.sample_batch(k, alpha, beta, &mut self.rng).map_err(to_py)?;
        Ok(batch.into_iter().map(|s| (s.slot, s.weight)).collect())
    }

    /// `count` distinct eviction candidates from a full buffer.
    #[pyo3(signature = (count, gamma=None))]
    fn replacement_candidates(&mut self, count: usize, gamma: Option<f64>) -> PyResult<Vec<usize>> {
        let gamma = gamma.unwrap_or(self.inner.gamma());
        self.inner
            .select_replacement_candidates(count, gamma, &mut self.rng)
            .map_err(to_py)
    }

    fn experience<'py>(&self, py: Python<'py>, slot: usize) -> PyResult<Bound<'py, PyDict>> {
        let exp = self.check_slot(slot)?;
        let d = PyDict::new(py);
        d.set_item("state", exp.state.clone())?;
        d.set_item("action", exp.action)?;
        d.set_item("reward", exp.reward)?;
        d.set_item("next_state", exp.next_state.clone())?;
        d.set_item("terminal", exp.terminal)?;
        d.set_item("birth_step", exp.birth_step)?;
        d.set_item("priority", exp.priority)?;
        Ok(d)
    }

    /// One CSV row per occupied slot.
    fn debug_csv(&self) -> PyResult<String> {
        let mut out = Vec::new();
        self.inner
            .write_debug_csv(&mut out)
            .map_err(|e| PyOSError::new_err(e.to_string()))?;
        String::from_utf8(out).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

impl PyReplayBuffer {
    fn check_slot(&self, slot: usize) -> PyResult<&Experience> {
        self.inner.get(slot).ok_or_else(|| to_py(Error::Slot(slot)))
    }
}

/// Restorable copy of an environment's full state.
#[pyclass(name = "Snapshot", unsendable)]
struct PySnapshot(envs::Snapshot);

#[pymethods]
impl PySnapshot {
    #[getter]
    fn env_name(&self) -> &'static str {
        self.0.env_name()
    }

    fn observation(&self) -> Vec<f64> {
        self.0.observation()
    }

    /// Independent environment starting from this state.
    fn spawn(&self) -> PyEnvironment {
        PyEnvironment(self.0.spawn())
    }
}

/// One of `forked_corridor`, `cartpole` or `chain`.
#[pyclass(name = "Environment", unsendable)]
struct PyEnvironment(Box<dyn SnapshotEnv>);

#[pymethods]
impl PyEnvironment {
    #[new]
    #[pyo3(signature = (name, seed=0))]
    fn new(name: &str, seed: u64) -> PyResult<Self> {
        let kind: EnvKind = parse(name)?;
        Ok(Self(EnvConfig::default_for(kind).build(seed)))
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.0.name()
    }

    #[getter]
    fn action_count(&self) -> usize {
        self.0.action_count()
    }

    #[getter]
    fn observation_dim(&self) -> usize {
        self.0.observation_dim()
    }

    fn reset(&mut self) -> Vec<f64> {
        self.0.reset()
    }

    /// Returns `(observation, reward, terminal)`.
    fn step(&mut self, action: usize) -> PyResult<(Vec<f64>, f64, bool)> {
        let step = self.0.step(action).map_err(to_py)?;
        Ok((step.observation, step.reward, step.terminal))
    }

    fn observation(&self) -> Vec<f64> {
        self.0.observation()
    }

    fn is_terminal(&self) -> bool {
        self.0.is_terminal()
    }

    fn snapshot(&self) -> PySnapshot {
        PySnapshot(self.0.snapshot())
    }
}

/// Fully connected ReLU network with one output per action.
#[pyclass(name = "DenseQNet")]
struct PyDenseQNet(DenseQNet);

#[pymethods]
impl PyDenseQNet {
    #[new]
    #[pyo3(signature = (input_dim, actions, hidden=vec![64, 64], seed=0))]
    fn new(input_dim: usize, actions: usize, hidden: Vec<usize>, seed: u64) -> PyResult<Self> {
        if input_dim == 0 || actions == 0 || hidden.contains(&0) {
            return Err(PyValueError::new_err("layer sizes must be positive"));
        }
        let mut layers = vec![input_dim];
        layers.extend(hidden);
        layers.push(actions);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self(DenseQNet::new(&layers, &mut rng)))
    }

    #[getter]
    fn layers(&self) -> Vec<usize> {
        self.0.layers().to_vec()
    }

    fn q_values(&self, state: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_input(&state)?;
        Ok(self.0.q_values(&state))
    }

    fn greedy_action(&self, state: Vec<f64>) -> PyResult<usize> {
        self.check_input(&state)?;
        Ok(q_model::greedy_action(&self.0, &state))
    }

    fn params(&self) -> Vec<f64> {
        self.0.params().to_vec()
    }

    fn set_params(&mut self, params: Vec<f64>) -> PyResult<()> {
        let dst = self.0.params_mut();
        if params.len() != dst.len() {
            return Err(to_py(Error::Shape {
                expected: vec![dst.len()],
                found: vec![params.len()],
            }));
        }
        dst.copy_from_slice(&params);
        Ok(())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let io = |e: std::io::Error| PyOSError::new_err(format!("{}: {e}", path.display()));
        let mut out = BufWriter::new(File::create(&path).map_err(io)?);
        q_model::write_params(&self.0, &mut out).map_err(io)?;
        out.flush().map_err(io)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let file = File::open(&path).map_err(|e| PyOSError::new_err(format!("{}: {e}", path.display())))?;
        DenseQNet::from_reader(BufReader::new(file)).map(Self).map_err(to_py)
    }
}

impl PyDenseQNet {
    fn check_input(&self, state: &[f64]) -> PyResult<()> {
        let expected = self.0.layers()[0];
        if state.len() != expected {
            return Err(PyValueError::new_err(format!(
                "state has {} features, network expects {expected}",
                state.len()
            )));
        }
        Ok(())
    }
}

/// Text form of a Python override value; booleans become `true`/`false`.
fn override_text(value: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(b) = value.cast::<PyBool>() {
        return Ok(b.is_true().to_string());
    }
    Ok(value.str()?.to_string())
}

fn spec_from(env: &str, mode: &str, seed: u64, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<ExperimentSpec> {
    let mut text = format!("env={env}\nmodes={mode}\nseeds={seed}\n");
    if let Some(overrides) = overrides {
        for (key, value) in overrides.iter() {
            text.push_str(&format!("{}={}\n", key.str()?, override_text(&value)?));
        }
    }
    experiment::parse_spec(&text).map_err(to_py)
}

/// Resolved settings for `env` as a `{key: value}` dict of strings.
#[pyfunction]
#[pyo3(signature = (env, overrides=None))]
fn default_config<'py>(
    py: Python<'py>,
    env: &str,
    overrides: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = spec_from(env, "dpsr", 0, overrides)?;
    let d = PyDict::new(py);
    for (key, value) in spec.config.entries() {
        d.set_item(key, value)?;
    }
    d.set_item("threshold", spec.threshold)?;
    Ok(d)
}

/// Runs one seeded training run and returns its metrics as a dict.
#[pyfunction]
#[pyo3(signature = (env, mode="dpsr", seed=0, overrides=None))]
fn train<'py>(
    py: Python<'py>,
    env: &str,
    mode: &str,
    seed: u64,
    overrides: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = spec_from(env, mode, seed, overrides)?;
    let mode: Mode = parse(mode)?;
    let config = spec.run_config(mode, seed);
    let metrics = py.detach(|| trainer::run(&config, &spec.env)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("episode_returns", metrics.episode_returns())?;
    d.set_item(
        "episode_end_steps",
        metrics.episodes.iter().map(|e| e.end_step).collect::<Vec<_>>(),
    )?;
    d.set_item("eval_returns", metrics.eval_returns.clone())?;
    d.set_item("final_eval", metrics.final_eval)?;
    d.set_item("final_first_action", metrics.final_first_action)?;
    d.set_item("best_mean100", metrics.best_mean100())?;
    d.set_item("steps_to_threshold", metrics.steps_to_threshold(spec.threshold))?;
    d.set_item("train_steps", metrics.train_steps)?;
    d.set_item("recycled", metrics.recycle.recycled)?;
    Ok(d)
}

/// Validates spec text and returns its fully resolved form.
#[pyfunction]
fn parse_spec(text: &str) -> PyResult<String> {
    experiment::parse_spec(text).map(|s| s.to_text()).map_err(to_py)
}

fn row_dict<'py>(py: Python<'py>, row: &SummaryRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mode", row.mode.as_str())?;
    d.set_item("seed", row.seed)?;
    d.set_item("final_eval", row.final_eval)?;
    d.set_item("best_mean100", row.best_mean100)?;
    d.set_item("steps_to_threshold", row.steps_to_threshold)?;
    Ok(d)
}

/// Runs a spec's full matrix into `out` and returns the summary rows.
#[pyfunction]
#[pyo3(signature = (spec_text, out, jobs=1))]
fn run_experiment<'py>(py: Python<'py>, spec_text: &str, out: PathBuf, jobs: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let spec = experiment::parse_spec(spec_text).map_err(to_py)?;
    let rows = py
        .detach(|| experiment::run_experiment(&spec, &out, jobs))
        .map_err(to_py)?;
    rows.iter().map(|r| row_dict(py, r)).collect()
}

/// Text report of the treatment's percentage gain over the baseline.
#[pyfunction]
fn compare(summaries: Vec<PathBuf>, baseline: &str, treatment: &str) -> PyResult<String> {
    let tables = summaries
        .iter()
        .map(|p| {
            let label = p
                .parent()
                .and_then(|d| d.file_name())
                .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
            Ok((label, experiment::read_summary(p)?))
        })
        .collect::<Result<Vec<_>, Error>>()
        .map_err(to_py)?;
    experiment::compare_report(&tables, parse(baseline)?, parse(treatment)?)
        .map(|r| r.to_string())
        .map_err(to_py)
}

/// Optimal action values of the chain world, `[cell][action]`.
#[pyfunction]
fn chain_q_star(n_states: usize, discount: f64) -> PyResult<Vec<[f64; 2]>> {
    if n_states == 0 || !(0.0..1.0).contains(&discount) {
        return Err(PyValueError::new_err("need n_states >= 1 and discount in [0, 1)"));
    }
    Ok(envs::chain_q_star(n_states, discount))
}

#[pymodule]
pub fn dpsr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPrefixSumTree>()?;
    m.add_class::<PyReplayBuffer>()?;
    m.add_class::<PyEnvironment>()?;
    m.add_class::<PySnapshot>()?;
    m.add_class::<PyDenseQNet>()?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(parse_spec, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(chain_q_star, m)?)?;
    m.add("MODES", ["uniform", "per", "dpsr", "dpsr_no_recycle"])?;
    m.add("ENVIRONMENTS", EnvKind::ALL.map(EnvKind::as_str))?;
    Ok(())
}
