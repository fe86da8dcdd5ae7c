//! Batch collection and GAE advantages.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::envs::Environment;
use crate::error::{check_len, Error, Result};
use crate::funcapprox::Network;
use crate::policy::GaussianPolicy;

/// Borrowed view of one stored step.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub state: ArrayView1<'a, f64>,
    pub action: ArrayView1<'a, f64>,
    pub noise: ArrayView1<'a, f64>,
    pub reward: f64,
    pub done: bool,
    pub log_prob_old: f64,
}

/// Columnar batch of `B` transitions in episode order.
#[derive(Debug, Clone)]
pub struct TrajectoryBatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub noise: Array2<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub log_prob_old: Vec<f64>,
    /// Policy mean at collection time, one row per transition.
    pub mean_old: Array2<f64>,
    pub log_std_old: Vec<f64>,
    /// Exclusive end index of every episode (the last may be truncated).
    pub episode_ends: Vec<usize>,
    /// Next state after the final transition when it did not terminate.
    pub bootstrap_state: Option<Vec<f64>>,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn action_dim(&self) -> usize {
        self.actions.ncols()
    }

    pub fn transition(&self, i: usize) -> Transition<'_> {
        Transition {
            state: self.states.row(i),
            action: self.actions.row(i),
            noise: self.noise.row(i),
            reward: self.rewards[i],
            done: self.dones[i],
            log_prob_old: self.log_prob_old[i],
        }
    }

    /// Old-policy log-density of each transition restricted to `subset`.
    pub fn log_prob_old_subspace(&self, subset: &[usize]) -> Vec<f64> {
        const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
        self.noise
            .rows()
            .into_iter()
            .map(|xi| {
                subset
                    .iter()
                    .map(|&i| -0.5 * xi[i] * xi[i] - self.log_std_old[i] - HALF_LN_2PI)
                    .sum()
            })
            .collect()
    }

    /// Episode `(start, end)` ranges.
    pub fn episodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let starts = std::iter::once(0).chain(self.episode_ends.iter().copied());
        starts.zip(self.episode_ends.iter().copied())
    }

    pub fn mean_reward(&self) -> f64 {
        self.rewards.iter().sum::<f64>() / self.len() as f64
    }

    /// Mean undiscounted return over episodes that terminated in the batch.
    pub fn mean_episode_return(&self) -> f64 {
        let (sum, count) = self
            .episodes()
            .filter(|&(_, e)| self.dones[e - 1])
            .fold((0.0, 0usize), |(s, c), (b, e)| (s + self.rewards[b..e].iter().sum::<f64>(), c + 1));
        if count == 0 {
            self.rewards.iter().sum::<f64>()
        } else {
            sum / count as f64
        }
    }
}

/// Roll out exactly `batch_size` steps, resetting after every terminal step.
pub fn collect<E, R>(env: &mut E, policy: &GaussianPolicy, batch_size: usize, rng: &mut R) -> Result<TrajectoryBatch>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
    }
    let n = env.state_dim();
    let m = env.action_dim();
    check_len("policy state dim", n, policy.state_dim())?;
    check_len("policy action dim", m, policy.action_dim())?;

    let mut states = Vec::with_capacity(batch_size * n);
    let mut actions = Vec::with_capacity(batch_size * m);
    let mut noise = Vec::with_capacity(batch_size * m);
    let mut means = Vec::with_capacity(batch_size * m);
    let mut rewards = Vec::with_capacity(batch_size);
    let mut dones = Vec::with_capacity(batch_size);
    let mut log_prob_old = Vec::with_capacity(batch_size);
    let mut episode_ends = Vec::new();
    let mut bootstrap_state = None;

    let std = policy.std();
    let mut state = env.reset();
    // Consecutive identical states reuse the mean (the bandit never changes).
    let mut cached: Option<(Vec<f64>, Vec<f64>)> = None;
    for t in 0..batch_size {
        let mean = match &cached {
            Some((s, mu)) if *s == state => mu.clone(),
            _ => {
                let mu = policy.mean(&state)?;
                cached = Some((state.clone(), mu.clone()));
                mu
            }
        };
        let xi: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let action: Vec<f64> = (0..m).map(|i| mean[i] + std[i] * xi[i]).collect();
        let outcome = env.step(&action)?;
        if !outcome.reward.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        states.extend_from_slice(&state);
        means.extend_from_slice(&mean);
        actions.extend_from_slice(&action);
        log_prob_old.push(policy.log_prob_from_noise(&xi, None));
        noise.extend_from_slice(&xi);
        rewards.push(outcome.reward);
        dones.push(outcome.done);
        if outcome.done {
            episode_ends.push(t + 1);
            if t + 1 < batch_size {
                state = env.reset();
            }
        } else if t + 1 == batch_size {
            episode_ends.push(t + 1);
            bootstrap_state = Some(outcome.state);
        } else {
            state = outcome.state;
        }
    }
    let shape = |cols: usize, data: Vec<f64>| {
        Array2::from_shape_vec((batch_size, cols), data).expect("rows were pushed per step")
    };
    Ok(TrajectoryBatch {
        states: shape(n, states),
        actions: shape(m, actions),
        noise: shape(m, noise),
        rewards,
        dones,
        log_prob_old,
        mean_old: shape(m, means),
        log_std_old: policy.log_std().to_vec(),
        episode_ends,
        bootstrap_state,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageBatch {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

fn check_discounts(gamma: f64, lambda: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} outside (0, 1]")));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(())
}

/// GAE from precomputed state values. `bootstrap_value` is used after a
/// truncated final transition.
pub fn gae_from_values(
    batch: &TrajectoryBatch,
    values: &[f64],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<AdvantageBatch> {
    check_discounts(gamma, lambda)?;
    check_len("values", batch.len(), values.len())?;
    let mut advantages = vec![0.0; batch.len()];
    for (start, end) in batch.episodes() {
        let mut running = 0.0;
        for t in (start..end).rev() {
            let next_value = if t + 1 < end {
                values[t + 1]
            } else if batch.dones[t] {
                0.0
            } else {
                bootstrap_value
            };
            let delta = batch.rewards[t] + gamma * next_value - values[t];
            running = delta + gamma * lambda * running;
            advantages[t] = running;
        }
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok(AdvantageBatch { advantages, returns })
}

/// Evaluate `value_net` on the batch and compute GAE.
pub fn compute_gae(batch: &TrajectoryBatch, value_net: &Network, gamma: f64, lambda: f64) -> Result<AdvantageBatch> {
    check_discounts(gamma, lambda)?;
    check_len("value net input", batch.state_dim(), value_net.spec().input_dim)?;
    check_len("value net output", 1, value_net.spec().output_dim)?;
    let values = state_values(value_net, batch.states.view())?;
    let bootstrap = match &batch.bootstrap_state {
        Some(s) => value_net.forward(s)?[0],
        None => 0.0,
    };
    gae_from_values(batch, &values, bootstrap, gamma, lambda)
}

/// Scalar network output for each row, evaluated once per distinct state.
pub fn state_values(value_net: &Network, states: ArrayView2<f64>) -> Result<Vec<f64>> {
    let index = crate::util::StateIndex::build(states);
    let out = value_net.forward_batch(index.unique.view())?;
    Ok(index.ids.iter().map(|&i| out[[i, 0]]).collect())
}

/// Discounted reward-to-go within each episode (no bootstrap).
pub fn reward_to_go(batch: &TrajectoryBatch, gamma: f64) -> Result<Vec<f64>> {
    check_discounts(gamma, 0.0)?;
    let mut out = vec![0.0; batch.len()];
    for (start, end) in batch.episodes() {
        let mut running = 0.0;
        for t in (start..end).rev() {
            running = batch.rewards[t] + gamma * running;
            out[t] = running;
        }
    }
    Ok(out)
}

/// Shift and scale used to standardize advantages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationStats {
    pub shift: f64,
    pub scale: f64,
}

impl NormalizationStats {
    pub const STD_FLOOR: f64 = 1e-8;

    pub fn identity() -> Self {
        Self { shift: 0.0, scale: 1.0 }
    }

    /// Population mean and standard deviation, std floored.
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::identity();
        }
        let n = xs.len() as f64;
        let shift = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - shift) * (x - shift)).sum::<f64>() / n;
        Self {
            shift,
            scale: var.sqrt().max(Self::STD_FLOOR),
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.shift) / self.scale
    }
}

/// Standardize advantages to mean 0 and std 1; returns are left unchanged.
pub fn normalize_advantages(adv: &AdvantageBatch) -> AdvantageBatch {
    let stats = NormalizationStats::of(&adv.advantages);
    AdvantageBatch {
        advantages: adv.advantages.iter().map(|&a| stats.apply(a)).collect(),
        returns: adv.returns.clone(),
    }
}

/// Convenience for building batches by hand (tests, bindings).
pub fn batch_from_rewards(rewards: &[f64], dones: &[bool], states: Array2<f64>) -> Result<TrajectoryBatch> {
    check_len("dones", rewards.len(), dones.len())?;
    check_len("states", rewards.len(), states.nrows())?;
    if rewards.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let b = rewards.len();
    let mut episode_ends: Vec<usize> = dones.iter().enumerate().filter(|(_, d)| **d).map(|(i, _)| i + 1).collect();
    if !dones[b - 1] {
        episode_ends.push(b);
    }
    Ok(TrajectoryBatch {
        states,
        actions: Array2::zeros((b, 1)),
        noise: Array2::zeros((b, 1)),
        rewards: rewards.to_vec(),
        dones: dones.to_vec(),
        log_prob_old: vec![0.0; b],
        mean_old: Array2::zeros((b, 1)),
        log_std_old: vec![0.0],
        episode_ends,
        bootstrap_state: None,
    })
}

impl AdvantageBatch {
    pub fn len(&self) -> usize {
        self.advantages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.advantages.is_empty()
    }

    pub fn as_array(&self) -> Array1<f64> {
        Array1::from(self.advantages.clone())
    }
}
