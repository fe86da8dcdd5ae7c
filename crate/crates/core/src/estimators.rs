//! Policy-gradient estimators and their clipped surrogate objectives.
//!
//! Every estimator evaluates, per sample and per action block `k`,
//! `min(ρ_k Ψ, clip(ρ_k, 1-ε, 1+ε) Ψ)` with the block ratio
//! `ρ_k = π_θ(a_k|s) / π_old(a_k|s)` and a detached signal `Ψ`. The
//! action-dependent estimators (GADB, ADFB, ASDG) use `Ψ = Â - c(s, a)` and add
//! the pathwise term `∇θ c(s, (f_k(θ, s, ξ), ·))` that restores the mean of
//! the subtracted baseline.
//!
//! For the quadratic (wide) part of `c` the complement of block `k` is set to
//! its old-policy mean, which is the conditional expectation of that part's
//! pathwise term given `ξ_k` (the gradient is affine in the complement). The
//! deep part is linearised at the sampled action. With a single block both
//! reduce to the plain reparameterized gradient of `c`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::advnet::{BaselineBatch, WideDeepAdvNet};
use crate::envs::Environment;
use crate::error::{check_len, Error, Result};
use crate::funcapprox::Network;
use crate::partition::Partition;
use crate::policy::{gaussian_log_density, GaussianPolicy};
use crate::rollout::{
    collect, compute_gae, reward_to_go, AdvantageBatch, NormalizationStats, TrajectoryBatch,
};
use crate::util::{select_rows, StateIndex};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EstimatorKind {
    #[serde(rename = "REINFORCE")]
    Reinforce,
    A2c,
    Gadb,
    Adfb,
    Asdg,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [Self::Reinforce, Self::A2c, Self::Gadb, Self::Adfb, Self::Asdg];

    pub fn name(self) -> &'static str {
        match self {
            Self::Reinforce => "REINFORCE",
            Self::A2c => "A2C",
            Self::Gadb => "GADB",
            Self::Adfb => "ADFB",
            Self::Asdg => "ASDG",
        }
    }

    /// Uses the fitted action-dependent baseline.
    pub fn action_dependent(self) -> bool {
        matches!(self, Self::Gadb | Self::Adfb | Self::Asdg)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub partition: Partition,
    pub use_reparam_correction: bool,
}

impl EstimatorSpec {
    /// Canonical spec for `kind` over `m` action dimensions. ASDG starts from
    /// the full block until a learned partition is supplied.
    pub fn new(kind: EstimatorKind, m: usize) -> Self {
        let partition = match kind {
            EstimatorKind::Adfb => Partition::singletons(m),
            _ => Partition::full(m),
        };
        Self {
            kind,
            partition,
            use_reparam_correction: kind.action_dependent(),
        }
    }

    pub fn asdg(partition: Partition) -> Self {
        Self {
            kind: EstimatorKind::Asdg,
            partition,
            use_reparam_correction: true,
        }
    }

    pub fn with_partition(mut self, partition: Partition) -> Result<Self> {
        check_len("partition dimension", self.partition.m(), partition.m())?;
        if self.kind == EstimatorKind::Asdg {
            self.partition = partition;
        }
        Ok(self)
    }

    fn validate(&self, m: usize) -> Result<()> {
        check_len("estimator partition dimension", m, self.partition.m())?;
        let expected = match self.kind {
            EstimatorKind::Adfb => Some(Partition::singletons(m)),
            EstimatorKind::Asdg => None,
            _ => Some(Partition::full(m)),
        };
        match expected {
            Some(p) if p != self.partition => Err(Error::InvalidPartition(format!(
                "{} requires partition {p}, got {}",
                self.kind, self.partition
            ))),
            _ => Ok(()),
        }
    }
}

/// Detached per-sample signal `Ψ` and the factor applied to the pathwise
/// correction so both share the same normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Signals {
    pub psi: Vec<f64>,
    pub correction_scale: f64,
}

/// Build `Ψ` for `kind`. `baseline_values` is `c(s_i, a_i)` and is required
/// for the action-dependent estimators. Normalization divides by the std of
/// the raw signal and subtracts the batch mean of what remains after the
/// baseline, so a well-fitted `c` is not offset by `mean(Â)`.
pub fn build_signals(
    kind: EstimatorKind,
    advantages: &AdvantageBatch,
    rewards_to_go: &[f64],
    baseline_values: Option<&[f64]>,
    normalize: bool,
) -> Result<Signals> {
    let raw: &[f64] = match kind {
        EstimatorKind::Reinforce => rewards_to_go,
        _ => &advantages.advantages,
    };
    let residual: Vec<f64> = if kind.action_dependent() {
        let c = baseline_values.ok_or_else(|| Error::InvalidArgument(format!("{kind} needs baseline values")))?;
        check_len("baseline values", raw.len(), c.len())?;
        raw.iter().zip(c).map(|(r, c)| r - c).collect()
    } else {
        raw.to_vec()
    };
    let scale = if normalize { NormalizationStats::of(raw).scale } else { 1.0 };
    let shift = if normalize || kind == EstimatorKind::Reinforce {
        NormalizationStats::of(&residual).shift
    } else {
        0.0
    };
    Ok(Signals {
        psi: residual.iter().map(|r| (r - shift) / scale).collect(),
        correction_scale: 1.0 / scale,
    })
}

/// Value of `min(ρΨ, clip(ρ)Ψ)` and whether the unclipped branch (the one
/// carrying a gradient) is active.
pub fn clipped_term(ratio: f64, psi: f64, clip_eps: f64) -> (f64, bool) {
    let clipped = (psi > 0.0 && ratio > 1.0 + clip_eps) || (psi < 0.0 && ratio < 1.0 - clip_eps);
    if clipped {
        (ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * psi, false)
    } else {
        (ratio * psi, true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateReport {
    /// Mean over the evaluated samples.
    pub objective: f64,
    /// Ascent direction with respect to the flat policy parameters.
    pub grad: Vec<f64>,
    /// Norms of the score and pathwise parts of the gradient with respect to
    /// the policy head (per-sample mean outputs and `log_std`).
    pub score_norm: f64,
    pub correction_norm: f64,
    /// Fraction of (sample, block) terms on the clipped branch.
    pub clip_fraction: f64,
}

fn head_norm(d_mean: &Array2<f64>, d_log_std: &[f64]) -> f64 {
    (d_mean.iter().chain(d_log_std).map(|v| v * v).sum::<f64>()).sqrt()
}

/// Evaluate the surrogate on `rows` of `batch` and leave its ascent gradient
/// in the policy's gradient buffers (previous contents are discarded).
/// A block's pathwise correction is dropped once its ratio leaves
/// `[1 - clip_eps, 1 + clip_eps]`.
/// `clip_eps = f64::INFINITY` disables clipping.
#[allow(clippy::too_many_arguments)]
pub fn surrogate(
    policy: &mut GaussianPolicy,
    batch: &TrajectoryBatch,
    rows: &[usize],
    signals: &Signals,
    baseline: Option<&BaselineBatch>,
    spec: &EstimatorSpec,
    clip_eps: f64,
) -> Result<SurrogateReport> {
    let m = policy.action_dim();
    check_len("batch action dim", m, batch.action_dim())?;
    check_len("signals", batch.len(), signals.psi.len())?;
    spec.validate(m)?;
    if !(clip_eps > 0.0) {
        return Err(Error::InvalidArgument(format!("clip epsilon {clip_eps} must be > 0")));
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("surrogate over zero samples".into()));
    }
    let correct = spec.use_reparam_correction && spec.kind.action_dependent();
    let baseline = match (correct, baseline) {
        (true, Some(b)) => {
            check_len("baseline batch", batch.len(), b.len())?;
            check_len("baseline action dim", m, b.action_dim())?;
            Some(b)
        }
        (true, None) => return Err(Error::InvalidArgument("pathwise correction needs a baseline".into())),
        (false, _) => None,
    };

    let states = select_rows(batch.states.view(), rows);
    let index = StateIndex::build(states.view());
    let means = policy.means(index.unique.view())?;
    let log_std = policy.log_std().to_vec();
    let std = policy.std();

    let b = rows.len();
    let mut d_mean_score = Array2::<f64>::zeros((b, m));
    let mut d_mean_corr = Array2::<f64>::zeros((b, m));
    let mut d_ls_score = vec![0.0; m];
    let mut d_ls_corr = vec![0.0; m];
    let mut objective = 0.0;
    let mut clipped_terms = 0usize;
    let blocks = spec.partition.blocks();
    let mut g_mu_old = vec![0.0; m];
    let mut in_region = vec![true; blocks.len()];

    for (local, &row) in rows.iter().enumerate() {
        let mu = means.row(index.ids[local]);
        let action = batch.actions.row(row);
        let noise = batch.noise.row(row);
        let psi = signals.psi[row];
        for (bk, block) in blocks.iter().enumerate() {
            let mut lp_new = 0.0;
            let mut lp_old = 0.0;
            for &j in block {
                lp_new += gaussian_log_density(action[j], mu[j], log_std[j]);
                lp_old += -0.5 * noise[j] * noise[j] - batch.log_std_old[j] - HALF_LN_2PI;
            }
            let ratio = (lp_new - lp_old).exp();
            in_region[bk] = (ratio - 1.0).abs() <= clip_eps;
            let (value, active) = clipped_term(ratio, psi, clip_eps);
            objective += value;
            if active {
                let w = ratio * psi;
                for &j in block {
                    let z = (action[j] - mu[j]) / std[j];
                    d_mean_score[[local, j]] += w * z / std[j];
                    d_ls_score[j] += w * (z * z - 1.0);
                }
            } else {
                clipped_terms += 1;
            }
        }

        if let Some(base) = baseline {
            let id = base.state_ids[row];
            let gram = &base.gram[id];
            let w1 = base.w1.row(id);
            let deep = base.deep_action_grad.row(row);
            let mu_old = batch.mean_old.row(row);
            for (p, g) in g_mu_old.iter_mut().enumerate() {
                *g = gram.row(p).dot(&mu_old);
            }
            let scale = signals.correction_scale;
            for (block, _) in blocks.iter().zip(&in_region).filter(|(_, &inside)| inside) {
                // Wide term at x = (f_k, μ_old elsewhere): d = f_k - μ_old,k.
                let d: Vec<f64> = block.iter().map(|&j| mu[j] + std[j] * noise[j] - mu_old[j]).collect();
                let mut quad = 0.0;
                for (bi, &j) in block.iter().enumerate() {
                    let gd: f64 = block.iter().zip(&d).map(|(&l, dl)| gram[[j, l]] * dl).sum();
                    let grad_wide = w1[j] + 2.0 * (g_mu_old[j] + gd);
                    let f_j = mu_old[j] + d[bi];
                    quad += d[bi] * (2.0 * g_mu_old[j] + gd);
                    objective += scale * (base.beta_wide * w1[j] * f_j + base.beta_deep * deep[j] * f_j);
                    let t = scale * (base.beta_wide * grad_wide + base.beta_deep * deep[j]);
                    d_mean_corr[[local, j]] += t;
                    d_ls_corr[j] += t * std[j] * noise[j];
                }
                objective += scale * base.beta_wide * quad;
            }
        }
    }

    let inv = 1.0 / b as f64;
    d_mean_score.mapv_inplace(|v| v * inv);
    d_mean_corr.mapv_inplace(|v| v * inv);
    d_ls_score.iter_mut().chain(d_ls_corr.iter_mut()).for_each(|v| *v *= inv);

    let score_norm = head_norm(&d_mean_score, &d_ls_score);
    let correction_norm = if baseline.is_some() { head_norm(&d_mean_corr, &d_ls_corr) } else { 0.0 };
    d_mean_score += &d_mean_corr;
    for (s, c) in d_ls_score.iter_mut().zip(&d_ls_corr) {
        *s += c;
    }
    policy.zero_grads();
    policy.accumulate_head_gradient(index.unique.view(), index.reduce(d_mean_score.view()).view(), &d_ls_score)?;
    let grad = policy.flat_grads();
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index: i });
    }
    Ok(SurrogateReport {
        objective: objective * inv,
        score_norm,
        correction_norm,
        clip_fraction: clipped_terms as f64 / (b * blocks.len()) as f64,
        grad,
    })
}

/// Frozen critics used to turn a batch into estimator inputs.
#[derive(Debug, Clone, Copy)]
pub struct Critics<'a> {
    pub value_net: &'a Network,
    pub advnet: Option<&'a WideDeepAdvNet>,
    pub gamma: f64,
    pub lambda: f64,
    pub normalize: bool,
}

/// Estimator gradient on a full batch at the current policy (no clipping).
pub fn batch_gradient(
    policy: &mut GaussianPolicy,
    batch: &TrajectoryBatch,
    spec: &EstimatorSpec,
    critics: &Critics<'_>,
    baseline: Option<&BaselineBatch>,
) -> Result<Vec<f64>> {
    let adv = compute_gae(batch, critics.value_net, critics.gamma, critics.lambda)?;
    let rtg = reward_to_go(batch, critics.gamma)?;
    let signals = build_signals(spec.kind, &adv, &rtg, baseline.map(|b| b.values.as_slice()), critics.normalize)?;
    let rows: Vec<usize> = (0..batch.len()).collect();
    Ok(surrogate(policy, batch, &rows, &signals, baseline, spec, f64::INFINITY)?.grad)
}

/// Trace of the empirical covariance of per-batch gradients, for several
/// estimators evaluated on the same `n_batches` batches.
pub fn gradient_variances<E, R>(
    policy: &GaussianPolicy,
    env: &mut E,
    specs: &[EstimatorSpec],
    critics: &Critics<'_>,
    n_batches: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<f64>>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    if n_batches < 2 {
        return Err(Error::InvalidArgument("gradient variance needs at least 2 batches".into()));
    }
    let mut probe = policy.clone();
    let mut samples: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(n_batches); specs.len()];
    for _ in 0..n_batches {
        let batch = collect(env, policy, batch_size, rng)?;
        let needs_baseline = specs.iter().any(|s| s.kind.action_dependent());
        let baseline = match (needs_baseline, critics.advnet) {
            (true, Some(net)) => Some(net.baseline_batch(batch.states.view(), batch.actions.view())?),
            (true, None) => Some(BaselineBatch::zero(batch.len(), batch.action_dim())),
            (false, _) => None,
        };
        for (spec, out) in specs.iter().zip(samples.iter_mut()) {
            let base = if spec.kind.action_dependent() { baseline.as_ref() } else { None };
            out.push(batch_gradient(&mut probe, &batch, spec, critics, base)?);
        }
    }
    Ok(samples.iter().map(|g| trace_covariance(g)).collect())
}

/// Single-estimator form of [`gradient_variances`].
pub fn gradient_variance<E, R>(
    policy: &GaussianPolicy,
    env: &mut E,
    spec: &EstimatorSpec,
    critics: &Critics<'_>,
    n_batches: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<f64>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    Ok(gradient_variances(policy, env, std::slice::from_ref(spec), critics, n_batches, batch_size, rng)?[0])
}

/// Sum over coordinates of the unbiased sample variance.
pub fn trace_covariance(samples: &[Vec<f64>]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let d = samples[0].len();
    (0..d)
        .map(|j| {
            let mean = samples.iter().map(|s| s[j]).sum::<f64>() / n as f64;
            samples.iter().map(|s| (s[j] - mean) * (s[j] - mean)).sum::<f64>() / (n - 1) as f64
        })
        .sum()
}

/// Per-sample pathwise cotangent `∂c/∂a` at `x = (f_k, μ_old elsewhere)` for
/// the wide part; exposed for tests and bindings.
pub fn wide_correction_cotangent(
    w1: ArrayView1<f64>,
    gram: &Array2<f64>,
    block: &[usize],
    f: ArrayView1<f64>,
    mean_old: ArrayView1<f64>,
) -> Vec<f64> {
    let mut x = mean_old.to_owned();
    for &j in block {
        x[j] = f[j];
    }
    let gx = gram.dot(&x);
    block.iter().map(|&j| w1[j] + 2.0 * gx[j]).collect()
}
