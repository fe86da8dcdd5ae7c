//! Python module `posa`: environments, partitions, GAE and the trainer.

use ndarray::Array2;
use posa_core::envs::{BlockQuadraticEnv, Environment};
use posa_core::experiment::ExperimentConfig;
use posa_core::partition::{self, AffinityState, Partition};
use posa_core::rollout::{batch_from_rewards, gae_from_values};
use posa_core::trainer::{IterationRecord, TrainConfig, Trainer};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: posa_core::Error) -> PyErr {
    match e {
        posa_core::Error::Io(_) | posa_core::Error::Csv(_) | posa_core::Error::Checkpoint(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn parse_partition(s: &str) -> PyResult<Partition> {
    s.parse().map_err(err)
}

/// Quadratic bandit with a hidden block-diagonal action Hessian.
#[pyclass(name = "BlockQuadraticEnv")]
struct PyBlockQuadraticEnv {
    inner: BlockQuadraticEnv,
}

#[pymethods]
impl PyBlockQuadraticEnv {
    #[new]
    #[pyo3(signature = (block_dims, seed=0, noise_std=0.1))]
    fn new(block_dims: Vec<usize>, seed: u64, noise_std: f64) -> PyResult<Self> {
        Ok(Self {
            inner: BlockQuadraticEnv::new(&block_dims, seed, noise_std).map_err(err)?,
        })
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn reset(&mut self) -> Vec<f64> {
        self.inner.reset()
    }

    /// Returns `(next_state, reward, done)`.
    fn step(&mut self, action: Vec<f64>) -> PyResult<(Vec<f64>, f64, bool)> {
        let out = self.inner.step(&action).map_err(err)?;
        Ok((out.state, out.reward, out.done))
    }

    /// Noise-free reward `aᵀ M a`.
    fn quadratic(&self, action: Vec<f64>) -> PyResult<f64> {
        if action.len() != self.inner.action_dim() {
            return Err(PyValueError::new_err(format!(
                "action has length {}, expected {}",
                action.len(),
                self.inner.action_dim()
            )));
        }
        Ok(self.inner.quadratic(&action))
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(self.inner.matrix())
    }

    fn true_partition(&self) -> String {
        self.inner.true_partition().to_string()
    }

    /// `(J, dJ/dmean, dJ/dlog_std)` for a Gaussian policy.
    fn analytic_objective(&self, mean: Vec<f64>, std: Vec<f64>) -> PyResult<(f64, Vec<f64>, Vec<f64>)> {
        let o = self.inner.analytic_objective(&mean, &std).map_err(err)?;
        Ok((o.value, o.grad_mean, o.grad_log_std))
    }
}

/// Smoothed affinity over action dimensions plus clustering.
#[pyclass(name = "AffinityState")]
struct PyAffinityState {
    inner: AffinityState,
}

#[pymethods]
impl PyAffinityState {
    #[new]
    #[pyo3(signature = (m, alpha=0.5))]
    fn new(m: usize, alpha: f64) -> PyResult<Self> {
        Ok(Self {
            inner: AffinityState::new(m, alpha).map_err(err)?,
        })
    }

    /// Blend a new Hessian estimate into the smoothed affinity.
    fn update(&mut self, hessian: Vec<Vec<f64>>) -> PyResult<()> {
        self.inner.update(matrix(hessian)?.view()).map_err(err)
    }

    fn smoothed(&self) -> Vec<Vec<f64>> {
        rows(self.inner.smoothed())
    }

    /// Partition string such as `"0,2|1,3"`.
    fn cluster(&self, k: usize) -> PyResult<String> {
        Ok(partition::cluster(&self.inner, k).map_err(err)?.to_string())
    }
}

#[pyfunction]
fn adjusted_rand_index(a: &str, b: &str) -> PyResult<f64> {
    partition::adjusted_rand_index(&parse_partition(a)?, &parse_partition(b)?).map_err(err)
}

/// Canonical form of a partition string.
#[pyfunction]
fn normalize_partition(s: &str) -> PyResult<String> {
    Ok(parse_partition(s)?.to_string())
}

/// GAE over a flat trajectory. Returns `(advantages, returns)`.
#[pyfunction]
#[pyo3(signature = (rewards, dones, values, bootstrap_value=0.0, gamma=0.99, lam=0.95))]
fn compute_gae(
    rewards: Vec<f64>,
    dones: Vec<bool>,
    values: Vec<f64>,
    bootstrap_value: f64,
    gamma: f64,
    lam: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let states = Array2::zeros((rewards.len(), 1));
    let batch = batch_from_rewards(&rewards, &dones, states).map_err(err)?;
    let out = gae_from_values(&batch, &values, bootstrap_value, gamma, lam).map_err(err)?;
    Ok((out.advantages, out.returns))
}

fn record_dict<'py>(py: Python<'py>, r: &IterationRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("iteration", r.iteration)?;
    d.set_item("env_steps", r.env_steps)?;
    d.set_item("mean_return", r.mean_return)?;
    d.set_item("objective", r.objective)?;
    d.set_item("score_norm", r.score_norm)?;
    d.set_item("correction_norm", r.correction_norm)?;
    d.set_item("clip_fraction", r.clip_fraction)?;
    d.set_item("grad_variance", r.grad_variance)?;
    d.set_item("partition", r.partition.to_string())?;
    d.set_item("value_loss", r.value_loss)?;
    d.set_item("adv_loss", r.adv_loss)?;
    Ok(d)
}

fn train_config(toml_text: Option<&str>) -> PyResult<TrainConfig> {
    match toml_text {
        Some(t) => TrainConfig::from_toml(t).map_err(err),
        None => Ok(TrainConfig::default()),
    }
}

/// One training run. `config` is a TOML document with `TrainConfig` keys.
#[pyclass(name = "Trainer")]
struct PyTrainer {
    inner: Trainer,
}

#[pymethods]
impl PyTrainer {
    #[new]
    #[pyo3(signature = (config=None))]
    fn new(config: Option<&str>) -> PyResult<Self> {
        Ok(Self {
            inner: Trainer::new(train_config(config)?).map_err(err)?,
        })
    }

    /// Run one iteration and return its metrics.
    fn step<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = self.inner.step().map_err(err)?;
        record_dict(py, &r)
    }

    #[getter]
    fn iteration(&self) -> usize {
        self.inner.iteration()
    }

    #[getter]
    fn partition(&self) -> String {
        self.inner.partition().to_string()
    }

    fn true_partition(&self) -> Option<String> {
        self.inner.env().true_partition().map(ToString::to_string)
    }

    /// Mean action of the current policy.
    fn policy_mean(&self, state: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.policy().mean(&state).map_err(err)
    }

    fn policy_std(&self) -> Vec<f64> {
        self.inner.policy().std()
    }

    /// Smoothed Hessian affinity used for clustering.
    fn affinity(&self) -> Vec<Vec<f64>> {
        rows(self.inner.affinity().smoothed())
    }
}

/// Check an experiment config and return its planned run ids.
#[pyfunction]
fn plan_experiment(config: &str) -> PyResult<Vec<String>> {
    let c = ExperimentConfig::from_toml(config).map_err(err)?;
    Ok(posa_core::experiment::plan_runs(&c, &Default::default())
        .into_iter()
        .map(|r| r.run_id)
        .collect())
}

#[pymodule]
fn posa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBlockQuadraticEnv>()?;
    m.add_class::<PyAffinityState>()?;
    m.add_class::<PyTrainer>()?;
    m.add_function(wrap_pyfunction!(adjusted_rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_partition, m)?)?;
    m.add_function(wrap_pyfunction!(compute_gae, m)?)?;
    m.add_function(wrap_pyfunction!(plan_experiment, m)?)?;
    Ok(())
}
