//! Environments: the block-quadratic one-step bandit with hidden permuted
//! structure, and a short deterministic chain for multi-step returns.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::partition::Partition;
use crate::util::{rng_stream, stream};

/// Observation emitted by the bandit. The reward ignores it; it only feeds
/// the networks. A zero input would pin every state-only network output to
/// its (zero) output bias and freeze the factorization term at a saddle.
pub const BANDIT_STATE: [f64; 1] = [1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment. After `done`, `reset` must be called before the
/// next `step`.
pub trait Environment: Send {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reset(&mut self) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;
}

fn check_action(action: &[f64], m: usize) -> Result<()> {
    check_len("action", m, action.len())?;
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("action"));
    }
    Ok(())
}

/// Split `m` into `k` near-equal block sizes (larger blocks first).
pub fn equal_blocks(m: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!("cannot split {m} dimensions into {k} blocks")));
    }
    Ok((0..k).map(|i| m / k + usize::from(i < m % k)).collect())
}

/// Expected reward of a Gaussian policy and its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticObjective {
    pub value: f64,
    pub grad_mean: Vec<f64>,
    pub grad_log_std: Vec<f64>,
}

/// `r(a) = aᵀ M a + ε` with `M = P diag(M_1, …, M_K) Pᵀ`.
#[derive(Debug, Clone)]
pub struct BlockQuadraticEnv {
    blocks: Vec<Array2<f64>>,
    /// `permutation[j]` is the action index of position `j` in block layout.
    permutation: Vec<usize>,
    matrix: Array2<f64>,
    true_partition: Partition,
    noise_std: f64,
    rng: ChaCha8Rng,
    awaiting_reset: bool,
}

impl BlockQuadraticEnv {
    pub const DEFAULT_NOISE_STD: f64 = 0.1;

    /// Each block is `-(B Bᵀ + 0.1 I)` with standard normal `B`; the
    /// assembled matrix is conjugated by a uniform random permutation.
    pub fn new(block_dims: &[usize], seed: u64, noise_std: f64) -> Result<Self> {
        if block_dims.is_empty() || block_dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid block dims {block_dims:?}")));
        }
        if !(noise_std >= 0.0) {
            return Err(Error::InvalidArgument("noise_std must be >= 0".into()));
        }
        let mut rng = rng_stream(seed, 0);
        let blocks: Vec<Array2<f64>> = block_dims
            .iter()
            .map(|&d| {
                let b = Array2::from_shape_simple_fn((d, d), || rng.sample::<f64, _>(StandardNormal));
                -(b.dot(&b.t()) + Array2::<f64>::eye(d) * 0.1)
            })
            .collect();
        let m: usize = block_dims.iter().sum();
        let mut permutation: Vec<usize> = (0..m).collect();
        permutation.shuffle(&mut rng);

        let mut matrix = Array2::zeros((m, m));
        let mut part_blocks = Vec::with_capacity(blocks.len());
        let mut start = 0;
        for block in &blocks {
            let d = block.nrows();
            for i in 0..d {
                for j in 0..d {
                    matrix[[permutation[start + i], permutation[start + j]]] = block[[i, j]];
                }
            }
            part_blocks.push(permutation[start..start + d].to_vec());
            start += d;
        }
        Ok(Self {
            blocks,
            permutation,
            matrix,
            true_partition: Partition::new(part_blocks, m)?,
            noise_std,
            rng: rng_stream(seed, stream::ENV),
            awaiting_reset: false,
        })
    }

    pub fn blocks(&self) -> &[Array2<f64>] {
        &self.blocks
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// The permuted full matrix `M`.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn true_partition(&self) -> &Partition {
        &self.true_partition
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Noise-free reward `aᵀ M a`.
    pub fn quadratic(&self, action: &[f64]) -> f64 {
        let a = Array1::from(action.to_vec());
        a.dot(&self.matrix.dot(&a))
    }

    /// `E[aᵀ M a]` for `a ~ N(mean, diag(std²))` with gradients in mean and
    /// log-std.
    pub fn analytic_objective(&self, mean: &[f64], std: &[f64]) -> Result<AnalyticObjective> {
        let m = self.matrix.nrows();
        check_len("mean", m, mean.len())?;
        check_len("std", m, std.len())?;
        let mu = Array1::from(mean.to_vec());
        let m_mu = self.matrix.dot(&mu);
        let trace: f64 = (0..m).map(|i| self.matrix[[i, i]] * std[i] * std[i]).sum();
        Ok(AnalyticObjective {
            value: mu.dot(&m_mu) + trace,
            grad_mean: m_mu.iter().map(|v| 2.0 * v).collect(),
            grad_log_std: (0..m).map(|i| 2.0 * self.matrix[[i, i]] * std[i] * std[i]).collect(),
        })
    }
}

impl Environment for BlockQuadraticEnv {
    fn state_dim(&self) -> usize {
        BANDIT_STATE.len()
    }

    fn action_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn reset(&mut self) -> Vec<f64> {
        self.awaiting_reset = false;
        BANDIT_STATE.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if self.awaiting_reset {
            return Err(Error::InvalidArgument("step after episode end without reset".into()));
        }
        check_action(action, self.action_dim())?;
        let eps = if self.noise_std > 0.0 {
            self.noise_std * self.rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        self.awaiting_reset = true;
        Ok(StepOutcome {
            state: BANDIT_STATE.to_vec(),
            reward: self.quadratic(action) + eps,
            done: true,
        })
    }
}

/// Build the bandit from `(m, K, block_dims)`, checking consistency.
pub fn make_block_quadratic(m: usize, k: usize, block_dims: &[usize], seed: u64) -> Result<BlockQuadraticEnv> {
    if block_dims.len() != k || block_dims.iter().sum::<usize>() != m {
        return Err(Error::InvalidArgument(format!(
            "block dims {block_dims:?} do not describe {k} blocks over {m} dimensions"
        )));
    }
    BlockQuadraticEnv::new(block_dims, seed, BlockQuadraticEnv::DEFAULT_NOISE_STD)
}

/// Five positions visited left to right; state is the one-hot position and
/// the reward is `1 - ||a - p/4||²`. Episodes last five steps.
#[derive(Debug, Clone)]
pub struct ChainEnv {
    action_dim: usize,
    position: usize,
    awaiting_reset: bool,
}

impl ChainEnv {
    pub const LENGTH: usize = 5;

    pub fn new(action_dim: usize) -> Result<Self> {
        if action_dim == 0 {
            return Err(Error::InvalidArgument("chain action_dim must be >= 1".into()));
        }
        Ok(Self {
            action_dim,
            position: 0,
            awaiting_reset: false,
        })
    }

    fn observe(&self) -> Vec<f64> {
        let mut s = vec![0.0; Self::LENGTH];
        s[self.position.min(Self::LENGTH - 1)] = 1.0;
        s
    }
}

impl Environment for ChainEnv {
    fn state_dim(&self) -> usize {
        Self::LENGTH
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn reset(&mut self) -> Vec<f64> {
        self.position = 0;
        self.awaiting_reset = false;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if self.awaiting_reset {
            return Err(Error::InvalidArgument("step after episode end without reset".into()));
        }
        check_action(action, self.action_dim)?;
        let target = self.position as f64 / (Self::LENGTH - 1) as f64;
        let reward = 1.0 - action.iter().map(|a| (a - target) * (a - target)).sum::<f64>();
        self.position += 1;
        let done = self.position == Self::LENGTH;
        self.awaiting_reset = done;
        Ok(StepOutcome {
            state: self.observe(),
            reward,
            done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_env(m: usize) -> BlockQuadraticEnv {
        let mut env = BlockQuadraticEnv::new(&vec![1; m], 0, 0.0).unwrap();
        env.matrix = -Array2::eye(m);
        env
    }

    #[test]
    fn zero_action_reward_is_noise() {
        let mut env = BlockQuadraticEnv::new(&[2, 2], 3, 0.0).unwrap();
        env.reset();
        let out = env.step(&[0.0; 4]).unwrap();
        assert_eq!(out.reward, 0.0);
        assert!(out.done);
    }

    #[test]
    fn minus_identity_quadratic() {
        let mut env = identity_env(2);
        env.reset();
        assert_eq!(env.step(&[1.0, 2.0]).unwrap().reward, -5.0);
    }

    #[test]
    fn analytic_objective_reference_values() {
        let env = identity_env(2);
        assert_eq!(env.analytic_objective(&[0.0, 0.0], &[0.0, 0.0]).unwrap().value, 0.0);
        let obj = env.analytic_objective(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(obj.value, -3.0);
        assert_eq!(obj.grad_mean, vec![-2.0, 0.0]);
    }

    #[test]
    fn stored_blocks_reconstruct_permuted_matrix() {
        let env = make_block_quadratic(4, 2, &[2, 2], 17).unwrap();
        let p = env.permutation();
        let m = env.matrix();
        let mut start = 0;
        let mut seen = Array2::<bool>::from_elem((4, 4), false);
        for block in env.blocks() {
            let d = block.nrows();
            for i in 0..d {
                for j in 0..d {
                    assert_eq!(m[[p[start + i], p[start + j]]], block[[i, j]]);
                    seen[[p[start + i], p[start + j]]] = true;
                }
            }
            start += d;
        }
        for ((i, j), &s) in seen.indexed_iter() {
            if !s {
                assert_eq!(m[[i, j]], 0.0);
            }
        }
    }

    #[test]
    fn blocks_are_negative_definite() {
        let env = BlockQuadraticEnv::new(&[3, 2], 9, 0.1).unwrap();
        for block in env.blocks() {
            for (i, j) in [(0, 1), (1, 0)] {
                assert_eq!(block[[i, j]], block[[j, i]]);
            }
            // Cholesky of -M_k succeeds only for a positive definite matrix.
            let a = -block.clone();
            let n = a.nrows();
            let mut l = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in 0..=i {
                    let s: f64 = (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum();
                    if i == j {
                        let d = a[[i, i]] - s;
                        assert!(d > 0.0);
                        l[[i, j]] = d.sqrt();
                    } else {
                        l[[i, j]] = (a[[i, j]] - s) / l[[j, j]];
                    }
                }
            }
        }
    }

    #[test]
    fn bad_construction_and_steps() {
        assert!(BlockQuadraticEnv::new(&[2, 0], 0, 0.1).is_err());
        assert!(make_block_quadratic(4, 2, &[2, 1], 0).is_err());
        let mut env = BlockQuadraticEnv::new(&[2], 0, 0.1).unwrap();
        env.reset();
        assert!(env.step(&[f64::NAN, 0.0]).is_err());
        env.step(&[0.0, 0.0]).unwrap();
        assert!(env.step(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn seeded_construction_is_bit_identical() {
        let a = BlockQuadraticEnv::new(&[5, 5], 42, 0.1).unwrap();
        let b = BlockQuadraticEnv::new(&[5, 5], 42, 0.1).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert_eq!(a.permutation(), b.permutation());
    }

    #[test]
    fn equal_splits() {
        assert_eq!(equal_blocks(20, 4).unwrap(), vec![5, 5, 5, 5]);
        assert_eq!(equal_blocks(10, 3).unwrap(), vec![4, 3, 3]);
        assert!(equal_blocks(2, 3).is_err());
    }

    #[test]
    fn chain_runs_five_steps() {
        let mut env = ChainEnv::new(1).unwrap();
        let s = env.reset();
        assert_eq!(s, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let mut rewards = Vec::new();
        loop {
            let out = env.step(&[0.0]).unwrap();
            rewards.push(out.reward);
            if out.done {
                break;
            }
        }
        assert_eq!(rewards.len(), 5);
        assert_eq!(rewards[0], 1.0);
        assert_eq!(rewards[4], 0.0);
    }
}
