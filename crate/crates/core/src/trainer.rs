//! The outer training loop: collect, update the policy, fit the critics,
//! re-estimate the action partition.

use std::path::PathBuf;
use std::time::Instant;

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::advnet::{AdvNetConfig, AdvNetOptimizer, BaselineBatch, WideDeepAdvNet};
use crate::envs::{make_block_quadratic, BlockQuadraticEnv, ChainEnv, Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::estimators::{build_signals, gradient_variance, surrogate, Critics, EstimatorKind, EstimatorSpec};
use crate::funcapprox::{fit_mse, Adam, AdamConfig, MlpSpec, Network};
use crate::partition::{cluster, AffinityState, Partition};
use crate::policy::GaussianPolicy;
use crate::rollout::{collect, gae_from_values, reward_to_go, state_values};
use crate::util::{rng_stream, stream, Minibatcher};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    BlockQuadratic {
        block_dims: Vec<usize>,
        #[serde(default = "default_noise_std")]
        noise_std: f64,
        /// Seed of the reward matrix; the run seed when absent.
        #[serde(default)]
        seed: Option<u64>,
    },
    Chain {
        action_dim: usize,
    },
}

fn default_noise_std() -> f64 {
    BlockQuadraticEnv::DEFAULT_NOISE_STD
}

impl EnvConfig {
    pub fn block_quadratic(block_dims: Vec<usize>) -> Self {
        Self::BlockQuadratic {
            block_dims,
            noise_std: default_noise_std(),
            seed: None,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self {
            Self::BlockQuadratic { block_dims, .. } => block_dims.iter().sum(),
            Self::Chain { action_dim } => *action_dim,
        }
    }

    pub fn build(&self, run_seed: u64) -> Result<EnvInstance> {
        Ok(match self {
            Self::BlockQuadratic {
                block_dims,
                noise_std,
                seed,
            } => {
                let m = block_dims.iter().sum();
                let mut env = make_block_quadratic(m, block_dims.len(), block_dims, seed.unwrap_or(run_seed))?;
                if *noise_std != env.noise_std() {
                    env = BlockQuadraticEnv::new(block_dims, seed.unwrap_or(run_seed), *noise_std)?;
                }
                EnvInstance::BlockQuadratic(env)
            }
            Self::Chain { action_dim } => EnvInstance::Chain(ChainEnv::new(*action_dim)?),
        })
    }
}

/// Concrete environment chosen by [`EnvConfig`].
#[derive(Debug, Clone)]
pub enum EnvInstance {
    BlockQuadratic(BlockQuadraticEnv),
    Chain(ChainEnv),
}

impl EnvInstance {
    pub fn true_partition(&self) -> Option<&Partition> {
        match self {
            Self::BlockQuadratic(env) => Some(env.true_partition()),
            Self::Chain(_) => None,
        }
    }
}

impl Environment for EnvInstance {
    fn state_dim(&self) -> usize {
        match self {
            Self::BlockQuadratic(e) => e.state_dim(),
            Self::Chain(e) => e.state_dim(),
        }
    }

    fn action_dim(&self) -> usize {
        match self {
            Self::BlockQuadratic(e) => e.action_dim(),
            Self::Chain(e) => e.action_dim(),
        }
    }

    fn reset(&mut self) -> Vec<f64> {
        match self {
            Self::BlockQuadratic(e) => e.reset(),
            Self::Chain(e) => e.reset(),
        }
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        match self {
            Self::BlockQuadratic(e) => e.step(action),
            Self::Chain(e) => e.step(action),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarianceProbeConfig {
    /// Probe after every `every`-th iteration.
    pub every: usize,
    pub n_batches: usize,
    pub batch_size: usize,
}

impl Default for VarianceProbeConfig {
    fn default() -> Self {
        Self {
            every: 10,
            n_batches: 10,
            batch_size: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_iterations: usize,
    pub policy_epochs: usize,
    pub policy_minibatch: usize,
    /// Gradient steps per iteration for the value and advantage nets.
    pub fit_steps: usize,
    pub fit_minibatch: usize,
    pub batch_size: usize,
    /// Number of action subspaces for ASDG.
    pub subspaces: usize,
    pub estimator: EstimatorKind,
    pub clip_eps: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub advantage_lr: f64,
    pub seed: u64,
    pub repartition_interval: usize,
    pub affinity_alpha: f64,
    pub normalize_advantages: bool,
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub initial_log_std: f64,
    pub advnet: AdvNetConfig,
    pub env: EnvConfig,
    pub variance_probe: Option<VarianceProbeConfig>,
    /// Fill `wall_ms`; off by default so traces are reproducible byte for byte.
    pub record_timing: bool,
    /// Write each iteration's curvature estimate as CSV into this directory.
    pub hessian_dump_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_iterations: 300,
            policy_epochs: 10,
            policy_minibatch: 64,
            fit_steps: 25,
            fit_minibatch: 256,
            batch_size: 2048,
            subspaces: 2,
            estimator: EstimatorKind::Asdg,
            clip_eps: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            policy_lr: 3e-4,
            value_lr: 1e-3,
            advantage_lr: 1e-3,
            seed: 0,
            repartition_interval: 1,
            affinity_alpha: 0.5,
            normalize_advantages: true,
            policy_hidden: vec![128, 128],
            value_hidden: vec![128, 128],
            initial_log_std: 0.0,
            advnet: AdvNetConfig::default(),
            env: EnvConfig::block_quadratic(vec![5, 5]),
            variance_probe: None,
            record_timing: false,
            hessian_dump_dir: None,
        }
    }
}

impl TrainConfig {
    /// Parse and validate a TOML document of config keys.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_iterations", self.n_iterations),
            ("policy_epochs", self.policy_epochs),
            ("policy_minibatch", self.policy_minibatch),
            ("fit_steps", self.fit_steps),
            ("fit_minibatch", self.fit_minibatch),
            ("batch_size", self.batch_size),
            ("subspaces", self.subspaces),
            ("repartition_interval", self.repartition_interval),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be >= 1")));
        }
        if !(self.clip_eps > 0.0) {
            return Err(Error::Config("clip_eps must be > 0".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config("gamma must lie in (0, 1] and lambda in [0, 1]".into()));
        }
        for (name, lr) in [("policy_lr", self.policy_lr), ("value_lr", self.value_lr), ("advantage_lr", self.advantage_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} must be a positive number")));
            }
        }
        if !(0.0..1.0).contains(&self.affinity_alpha) {
            return Err(Error::Config("affinity_alpha must lie in [0, 1)".into()));
        }
        let m = self.env.action_dim();
        if m == 0 {
            return Err(Error::Config("environment has no action dimensions".into()));
        }
        if self.estimator == EstimatorKind::Asdg && self.subspaces > m {
            return Err(Error::Config(format!("subspaces {} exceeds action dimension {m}", self.subspaces)));
        }
        if let Some(p) = &self.variance_probe {
            if p.every == 0 || p.n_batches < 2 || p.batch_size == 0 {
                return Err(Error::Config("variance_probe needs every >= 1, n_batches >= 2, batch_size >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Logical timestamps of the phases of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStamps {
    pub collect: u64,
    pub policy_update: u64,
    pub fit: u64,
    /// Present when the partition was recomputed at the end of the iteration.
    pub cluster: Option<u64>,
    /// Fit stamp of the advantage net the partition was computed from.
    pub cluster_source_fit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub env_steps: u64,
    pub mean_return: f64,
    pub objective: f64,
    pub score_norm: f64,
    pub correction_norm: f64,
    pub clip_fraction: f64,
    pub grad_variance: Option<f64>,
    /// Partition used by this iteration's policy update.
    pub partition: Partition,
    pub value_loss_before: f64,
    pub value_loss: f64,
    pub adv_loss_before: Option<f64>,
    pub adv_loss: Option<f64>,
    pub wall_ms: Option<f64>,
    pub stamps: PhaseStamps,
}

/// Owns every mutable component of a run.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    env: EnvInstance,
    policy: GaussianPolicy,
    mean_opt: Adam,
    log_std_opt: Adam,
    value_net: Network,
    value_opt: Adam,
    advnet: WideDeepAdvNet,
    adv_opt: AdvNetOptimizer,
    affinity: AffinityState,
    partition: Partition,
    collect_rng: ChaCha8Rng,
    shuffle_rng: ChaCha8Rng,
    probe_rng: ChaCha8Rng,
    iteration: usize,
    env_steps: u64,
    clock: u64,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let env = config.env.build(seed)?;
        let (n, m) = (env.state_dim(), env.action_dim());
        let mut policy = GaussianPolicy::new(n, m, &config.policy_hidden, &mut rng_stream(seed, stream::POLICY_INIT))?;
        policy.set_log_std(&vec![config.initial_log_std; m])?;
        let value_net = Network::new(
            MlpSpec::new(n, &config.value_hidden, 1)?,
            &mut rng_stream(seed, stream::VALUE_INIT),
        );
        let advnet = WideDeepAdvNet::new(n, m, &config.advnet, &mut rng_stream(seed, stream::ADVNET_INIT))?;
        let mean_opt = Adam::new(AdamConfig::with_lr(config.policy_lr), policy.mean_net().params.len())?;
        let log_std_opt = Adam::new(AdamConfig::with_lr(config.policy_lr), m)?;
        let value_opt = Adam::new(AdamConfig::with_lr(config.value_lr), value_net.params.len())?;
        let adv_opt = advnet.optimizer(AdamConfig::with_lr(config.advantage_lr))?;
        let partition = EstimatorSpec::new(config.estimator, m).partition;
        Ok(Self {
            affinity: AffinityState::new(m, config.affinity_alpha)?,
            env,
            policy,
            mean_opt,
            log_std_opt,
            value_net,
            value_opt,
            advnet,
            adv_opt,
            partition,
            collect_rng: rng_stream(seed, stream::COLLECT),
            shuffle_rng: rng_stream(seed, stream::SHUFFLE),
            probe_rng: rng_stream(seed, stream::PROBE),
            iteration: 0,
            env_steps: 0,
            clock: 0,
            config,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn env(&self) -> &EnvInstance {
        &self.env
    }

    pub fn policy(&self) -> &GaussianPolicy {
        &self.policy
    }

    pub fn value_net(&self) -> &Network {
        &self.value_net
    }

    pub fn advnet(&self) -> &WideDeepAdvNet {
        &self.advnet
    }

    pub fn affinity(&self) -> &AffinityState {
        &self.affinity
    }

    /// Partition the next policy update will use.
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn uses_baseline(&self) -> bool {
        self.config.estimator.action_dependent()
    }

    fn spec(&self) -> Result<EstimatorSpec> {
        let m = self.policy.action_dim();
        let mut spec = EstimatorSpec::new(self.config.estimator, m);
        if spec.kind == EstimatorKind::Asdg {
            spec = spec.with_partition(self.partition.clone())?;
        }
        Ok(spec)
    }

    /// Run one full iteration and return its record.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let started = Instant::now();
        let cfg = self.config.clone();
        let spec = self.spec()?;

        let batch = collect(&mut self.env, &self.policy, cfg.batch_size, &mut self.collect_rng)?;
        self.env_steps += batch.len() as u64;
        let collect_stamp = self.tick();

        let values = state_values(&self.value_net, batch.states.view())?;
        let bootstrap = match &batch.bootstrap_state {
            Some(s) => self.value_net.forward(s)?[0],
            None => 0.0,
        };
        let adv = gae_from_values(&batch, &values, bootstrap, cfg.gamma, cfg.lambda)?;
        let rtg = reward_to_go(&batch, cfg.gamma)?;
        let baseline: Option<BaselineBatch> = if self.uses_baseline() {
            Some(self.advnet.baseline_batch(batch.states.view(), batch.actions.view())?)
        } else {
            None
        };
        let signals = build_signals(
            cfg.estimator,
            &adv,
            &rtg,
            baseline.as_ref().map(|b| b.values.as_slice()),
            cfg.normalize_advantages,
        )?;

        let (mut objective, mut score_norm, mut correction_norm, mut clip_fraction) = (0.0, 0.0, 0.0, 0.0);
        let mut updates = 0usize;
        for _ in 0..cfg.policy_epochs {
            for rows in Minibatcher::epoch(batch.len(), cfg.policy_minibatch, &mut self.shuffle_rng) {
                let report = surrogate(&mut self.policy, &batch, &rows, &signals, baseline.as_ref(), &spec, cfg.clip_eps)?;
                objective += report.objective;
                score_norm += report.score_norm;
                correction_norm += report.correction_norm;
                clip_fraction += report.clip_fraction;
                updates += 1;
                for g in self.policy.mean_net_mut().params.grads_mut() {
                    *g = -*g;
                }
                for g in self.policy.log_std_params_mut().grads_mut() {
                    *g = -*g;
                }
                self.mean_opt.step(&mut self.policy.mean_net_mut().params)?;
                self.log_std_opt.step(self.policy.log_std_params_mut())?;
            }
        }
        let policy_stamp = self.tick();

        let returns = Array2::from_shape_vec((batch.len(), 1), adv.returns.clone()).expect("one return per row");
        let value_loss_before = squared_error(&values, &adv.returns);
        fit_mse(
            &mut self.value_net,
            &mut self.value_opt,
            batch.states.view(),
            returns.view(),
            cfg.fit_steps,
            cfg.fit_minibatch,
            &mut self.shuffle_rng,
        )?;
        let value_loss = squared_error(&state_values(&self.value_net, batch.states.view())?, &adv.returns);
        if !value_loss.is_finite() {
            return Err(Error::NonFinite("value loss"));
        }
        let (mut adv_loss_before, mut adv_loss) = (None, None);
        if self.uses_baseline() {
            let (s, a) = (batch.states.view(), batch.actions.view());
            let fitted = baseline.as_ref().map(|b| b.values.as_slice()).unwrap_or_default();
            adv_loss_before = Some(squared_error(fitted, &adv.advantages));
            self.advnet.fit(
                &mut self.adv_opt,
                s,
                a,
                &adv.advantages,
                cfg.fit_steps,
                cfg.fit_minibatch,
                &mut self.shuffle_rng,
            )?;
            let after = self.advnet.loss(s, a, &adv.advantages)?;
            if !after.is_finite() {
                return Err(Error::NonFinite("advantage loss"));
            }
            adv_loss = Some(after);
        }
        let fit_stamp = self.tick();

        let used_partition = self.partition.clone();
        let (mut cluster_stamp, mut cluster_source) = (None, None);
        if cfg.estimator == EstimatorKind::Asdg {
            let hess = self.advnet.hessian(batch.states.view())?;
            if let Some(dir) = &cfg.hessian_dump_dir {
                std::fs::create_dir_all(dir)?;
                let file = std::fs::File::create(dir.join(format!("hessian_{:05}.csv", self.iteration)))?;
                hess.write_csv(file)?;
            }
            self.affinity.update(hess.matrix.view())?;
            if (self.iteration + 1) % cfg.repartition_interval == 0 {
                self.partition = cluster(&self.affinity, cfg.subspaces)?;
                cluster_stamp = Some(self.tick());
                cluster_source = Some(fit_stamp);
            }
        }

        let grad_variance = match &cfg.variance_probe {
            Some(p) if (self.iteration + 1) % p.every == 0 => {
                let critics = Critics {
                    value_net: &self.value_net,
                    advnet: Some(&self.advnet),
                    gamma: cfg.gamma,
                    lambda: cfg.lambda,
                    normalize: cfg.normalize_advantages,
                };
                let mut probe_env = self.env.clone();
                let probe_spec = self.spec()?;
                Some(gradient_variance(
                    &self.policy,
                    &mut probe_env,
                    &probe_spec,
                    &critics,
                    p.n_batches,
                    p.batch_size,
                    &mut self.probe_rng,
                )?)
            }
            _ => None,
        };

        let record = IterationRecord {
            iteration: self.iteration,
            env_steps: self.env_steps,
            mean_return: batch.mean_episode_return(),
            objective: objective / updates as f64,
            score_norm: score_norm / updates as f64,
            correction_norm: correction_norm / updates as f64,
            clip_fraction: clip_fraction / updates as f64,
            grad_variance,
            partition: used_partition,
            value_loss_before,
            value_loss,
            adv_loss_before,
            adv_loss,
            wall_ms: cfg.record_timing.then(|| started.elapsed().as_secs_f64() * 1e3),
            stamps: PhaseStamps {
                collect: collect_stamp,
                policy_update: policy_stamp,
                fit: fit_stamp,
                cluster: cluster_stamp,
                cluster_source_fit: cluster_source,
            },
        };
        self.iteration += 1;
        Ok(record)
    }
}

fn squared_error(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / target.len().max(1) as f64
}

/// Run `config.n_iterations` iterations, handing each record to `observer`
/// as soon as it exists.
pub fn posa_train_with<F>(config: &TrainConfig, mut observer: F) -> Result<Vec<IterationRecord>>
where
    F: FnMut(&IterationRecord) -> Result<()>,
{
    let mut trainer = Trainer::new(config.clone())?;
    let mut records = Vec::with_capacity(config.n_iterations);
    for _ in 0..config.n_iterations {
        let record = trainer.step()?;
        observer(&record)?;
        records.push(record);
    }
    Ok(records)
}

pub fn posa_train(config: &TrainConfig) -> Result<Vec<IterationRecord>> {
    posa_train_with(config, |_| Ok(()))
}

/// Check the phase order of a trace: each iteration collects, updates the
/// policy, fits, and only then re-clusters from that same fit; the first
/// iteration uses the full block; partitions change only right after a
/// clustering step.
pub fn posa_step_order_check(trace: &[IterationRecord]) -> std::result::Result<(), String> {
    let mut last = 0u64;
    for (i, r) in trace.iter().enumerate() {
        if r.iteration != i {
            return Err(format!("record {i} carries iteration {}", r.iteration));
        }
        let s = &r.stamps;
        if !(last < s.collect && s.collect < s.policy_update && s.policy_update < s.fit) {
            return Err(format!("iteration {i}: phases out of order {s:?}"));
        }
        last = s.fit;
        if let Some(c) = s.cluster {
            if c <= s.fit || s.cluster_source_fit != Some(s.fit) {
                return Err(format!("iteration {i}: partition not computed from this iteration's fit"));
            }
            last = c;
        }
        if i > 0 {
            let prev = &trace[i - 1];
            if env_steps_decrease(prev, r) {
                return Err(format!("iteration {i}: env steps decreased"));
            }
            if prev.stamps.cluster.is_none() && prev.partition != r.partition {
                return Err(format!("iteration {i}: partition changed without a clustering step"));
            }
        }
    }
    if let Some(first) = trace.first() {
        if first.partition.k() != 1 && first.partition != Partition::singletons(first.partition.m()) {
            return Err("first iteration must use the bootstrap partition".into());
        }
    }
    Ok(())
}

fn env_steps_decrease(prev: &IterationRecord, next: &IterationRecord) -> bool {
    next.env_steps <= prev.env_steps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(estimator: EstimatorKind) -> TrainConfig {
        TrainConfig {
            n_iterations: 2,
            policy_epochs: 2,
            policy_minibatch: 16,
            fit_steps: 3,
            fit_minibatch: 32,
            batch_size: 64,
            subspaces: 2,
            estimator,
            policy_hidden: vec![8],
            value_hidden: vec![8],
            advnet: AdvNetConfig {
                wide_hidden: vec![8],
                deep_hidden: vec![8, 8],
                ..AdvNetConfig::default()
            },
            env: EnvConfig::block_quadratic(vec![2, 2]),
            ..TrainConfig::default()
        }
    }

    #[test]
    fn chain_reinforce_smoke() {
        let config = TrainConfig {
            n_iterations: 1,
            estimator: EstimatorKind::Reinforce,
            env: EnvConfig::Chain { action_dim: 2 },
            ..tiny(EstimatorKind::Reinforce)
        };
        let trace = posa_train(&config).unwrap();
        assert_eq!(trace.len(), 1);
        assert!(trace[0].adv_loss.is_none());
    }

    #[test]
    fn order_and_bootstrap() {
        let trace = posa_train(&tiny(EstimatorKind::Asdg)).unwrap();
        posa_step_order_check(&trace).unwrap();
        assert_eq!(trace[0].partition, Partition::full(4));
        assert!(trace.iter().all(|r| r.stamps.cluster.unwrap() > r.stamps.fit));
    }

    #[test]
    fn repartition_windows() {
        let config = TrainConfig {
            n_iterations: 7,
            repartition_interval: 3,
            ..tiny(EstimatorKind::Asdg)
        };
        let trace = posa_train(&config).unwrap();
        posa_step_order_check(&trace).unwrap();
        let clustered: Vec<bool> = trace.iter().map(|r| r.stamps.cluster.is_some()).collect();
        assert_eq!(clustered, vec![false, false, true, false, false, true, false]);
        for w in [0..3, 3..6] {
            let p = &trace[w.start].partition;
            assert!(trace[w].iter().all(|r| &r.partition == p));
        }
    }

    #[test]
    fn single_block_asdg_matches_gadb() {
        let asdg = TrainConfig {
            subspaces: 1,
            ..tiny(EstimatorKind::Asdg)
        };
        let a = posa_train(&asdg).unwrap();
        let b = posa_train(&tiny(EstimatorKind::Gadb)).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.mean_return, y.mean_return);
            assert_eq!(x.objective, y.objective);
            assert_eq!(x.value_loss, y.value_loss);
            assert_eq!(x.adv_loss, y.adv_loss);
            assert_eq!(x.partition, y.partition);
        }
    }

    #[test]
    fn deterministic_traces() {
        let a = posa_train(&tiny(EstimatorKind::Asdg)).unwrap();
        let b = posa_train(&tiny(EstimatorKind::Asdg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn order_violation_detected() {
        let mut trace = posa_train(&tiny(EstimatorKind::Asdg)).unwrap();
        trace[1].stamps.cluster_source_fit = Some(0);
        assert!(posa_step_order_check(&trace).is_err());
    }

    #[test]
    fn invalid_configs() {
        for bad in [
            TrainConfig { batch_size: 0, ..tiny(EstimatorKind::Asdg) },
            TrainConfig { clip_eps: 0.0, ..tiny(EstimatorKind::Asdg) },
            TrainConfig { subspaces: 5, ..tiny(EstimatorKind::Asdg) },
            TrainConfig { gamma: 0.0, ..tiny(EstimatorKind::Asdg) },
        ] {
            assert!(Trainer::new(bad).is_err());
        }
    }
}
