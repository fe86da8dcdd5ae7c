//! Diagonal Gaussian policy `a = μ_θ(s) + exp(log_std) ⊙ ξ`, `ξ ~ N(0, I)`.
//!
//! `log_std` is a free, state-independent parameter vector, so the density
//! factorizes over any set of action dimensions.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::funcapprox::{MlpSpec, Network, ParamStore};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// `log N(x; mean, exp(log_std)^2)` for one dimension.
pub fn gaussian_log_density(x: f64, mean: f64, log_std: f64) -> f64 {
    let z = (x - mean) / log_std.exp();
    -0.5 * z * z - log_std - HALF_LN_2PI
}

/// One draw from the policy together with the base noise that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledAction {
    pub action: Vec<f64>,
    pub noise: Vec<f64>,
    pub log_prob: f64,
}

/// Gradient of a scalar with respect to the policy head: the mean output for
/// one state and the shared log standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient {
    pub d_mean: Vec<f64>,
    pub d_log_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GaussianPolicy {
    mean_net: Network,
    log_std: ParamStore,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let spec = MlpSpec::new(state_dim, hidden, action_dim)?;
        Ok(Self {
            mean_net: Network::new(spec, rng),
            log_std: ParamStore::zeros(action_dim),
        })
    }

    pub fn from_parts(mean_net: Network, log_std: Vec<f64>) -> Result<Self> {
        check_len("log_std", mean_net.spec().output_dim, log_std.len())?;
        Ok(Self {
            mean_net,
            log_std: ParamStore::from_values(log_std)?,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.mean_net.spec().input_dim
    }

    pub fn action_dim(&self) -> usize {
        self.mean_net.spec().output_dim
    }

    pub fn mean_net(&self) -> &Network {
        &self.mean_net
    }

    pub fn mean_net_mut(&mut self) -> &mut Network {
        &mut self.mean_net
    }

    pub fn log_std(&self) -> &[f64] {
        self.log_std.values()
    }

    pub fn log_std_params_mut(&mut self) -> &mut ParamStore {
        &mut self.log_std
    }

    pub fn set_log_std(&mut self, log_std: &[f64]) -> Result<()> {
        check_len("log_std", self.action_dim(), log_std.len())?;
        self.log_std.values_mut().copy_from_slice(log_std);
        Ok(())
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std().iter().map(|l| l.exp()).collect()
    }

    /// Number of entries in θ: mean-net parameters followed by `log_std`.
    pub fn param_count(&self) -> usize {
        self.mean_net.params.len() + self.log_std.len()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = self.mean_net.params.values().to_vec();
        out.extend_from_slice(self.log_std.values());
        out
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        let mut out = self.mean_net.params.grads().to_vec();
        out.extend_from_slice(self.log_std.grads());
        out
    }

    pub fn set_flat_params(&mut self, theta: &[f64]) -> Result<()> {
        check_len("policy parameters", self.param_count(), theta.len())?;
        let n = self.mean_net.params.len();
        self.mean_net.params.values_mut().copy_from_slice(&theta[..n]);
        self.log_std.values_mut().copy_from_slice(&theta[n..]);
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.mean_net.params.zero_grads();
        self.log_std.zero_grads();
    }

    pub fn mean(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.mean_net.forward(state)
    }

    pub fn means(&self, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.mean_net.forward_batch(states)
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<SampledAction> {
        let noise: Vec<f64> = (0..self.action_dim())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        self.sample_with_noise(state, noise)
    }

    /// Deterministic reparameterized draw for a given ξ.
    pub fn sample_with_noise(&self, state: &[f64], noise: Vec<f64>) -> Result<SampledAction> {
        check_len("noise", self.action_dim(), noise.len())?;
        let mean = self.mean(state)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(self.log_std())
            .zip(&noise)
            .map(|((m, l), x)| m + l.exp() * x)
            .collect();
        let log_prob = self.log_prob_from_noise(&noise, None);
        Ok(SampledAction {
            action,
            noise,
            log_prob,
        })
    }

    /// Log-density of the draw with base noise `noise`, optionally restricted
    /// to `subset`.
    pub fn log_prob_from_noise(&self, noise: &[f64], subset: Option<&[usize]>) -> f64 {
        let term = |i: usize| -0.5 * noise[i] * noise[i] - self.log_std()[i] - HALF_LN_2PI;
        match subset {
            Some(s) => s.iter().map(|&i| term(i)).sum(),
            None => (0..noise.len()).map(term).sum(),
        }
    }

    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        check_len("action", self.action_dim(), action.len())?;
        let mean = self.mean(state)?;
        Ok((0..action.len())
            .map(|i| gaussian_log_density(action[i], mean[i], self.log_std()[i]))
            .sum())
    }

    /// `Σ_{i ∈ subset} log N(a_i; μ_i(s), σ_i²)`.
    pub fn log_prob_subspace(&self, state: &[f64], action: &[f64], subset: &[usize]) -> Result<f64> {
        check_len("action", self.action_dim(), action.len())?;
        self.check_subset(subset)?;
        let mean = self.mean(state)?;
        Ok(subset
            .iter()
            .map(|&i| gaussian_log_density(action[i], mean[i], self.log_std()[i]))
            .sum())
    }

    /// Head gradient of `log_prob_subspace` (zero outside `subset`).
    pub fn score_subspace(&self, state: &[f64], action: &[f64], subset: &[usize]) -> Result<HeadGradient> {
        check_len("action", self.action_dim(), action.len())?;
        self.check_subset(subset)?;
        let mean = self.mean(state)?;
        let m = self.action_dim();
        let mut g = HeadGradient {
            d_mean: vec![0.0; m],
            d_log_std: vec![0.0; m],
        };
        for &i in subset {
            let var = (2.0 * self.log_std()[i]).exp();
            let diff = action[i] - mean[i];
            g.d_mean[i] = diff / var;
            g.d_log_std[i] = diff * diff / var - 1.0;
        }
        Ok(g)
    }

    /// The action `f(θ, s, ξ)` where only the components in `subset` carry a
    /// gradient path to θ.
    pub fn reparam_action_subspace(
        &self,
        state: &[f64],
        noise: &[f64],
        subset: &[usize],
    ) -> Result<SubspaceAction> {
        check_len("noise", self.action_dim(), noise.len())?;
        self.check_subset(subset)?;
        let mean = self.mean(state)?;
        let std = self.std();
        let value = (0..noise.len()).map(|i| mean[i] + std[i] * noise[i]).collect();
        Ok(SubspaceAction {
            value,
            noise: noise.to_vec(),
            std,
            subset: subset.to_vec(),
        })
    }

    /// Accumulate θ-gradients from per-sample head gradients:
    /// `d_mean` is `(batch, m)` aligned with `states`, `d_log_std` is summed
    /// over the batch already.
    pub fn accumulate_head_gradient(
        &mut self,
        states: ArrayView2<f64>,
        d_mean: ArrayView2<f64>,
        d_log_std: &[f64],
    ) -> Result<()> {
        check_len("head gradient rows", states.nrows(), d_mean.nrows())?;
        check_len("log_std gradient", self.action_dim(), d_log_std.len())?;
        self.mean_net.forward_train(states)?;
        self.mean_net.backward(d_mean)?;
        self.mean_net.clear_tape();
        self.log_std.accumulate_grads(d_log_std, 1.0)
    }

    fn check_subset(&self, subset: &[usize]) -> Result<()> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&bad) = subset.iter().find(|&&i| i >= self.action_dim()) {
            return Err(Error::InvalidArgument(format!(
                "action index {bad} out of range for dimension {}",
                self.action_dim()
            )));
        }
        Ok(())
    }
}

/// Action vector whose components in `subset` are differentiable in θ; the
/// rest are constants equal to the sampled action.
#[derive(Debug, Clone)]
pub struct SubspaceAction {
    pub value: Vec<f64>,
    noise: Vec<f64>,
    std: Vec<f64>,
    subset: Vec<usize>,
}

impl SubspaceAction {
    /// Chain a cotangent `d/d value` onto the policy head.
    pub fn head_gradient(&self, cotangent: &[f64]) -> Result<HeadGradient> {
        check_len("cotangent", self.value.len(), cotangent.len())?;
        let m = self.value.len();
        let mut g = HeadGradient {
            d_mean: vec![0.0; m],
            d_log_std: vec![0.0; m],
        };
        for &i in &self.subset {
            g.d_mean[i] = cotangent[i];
            g.d_log_std[i] = cotangent[i] * self.std[i] * self.noise[i];
        }
        Ok(g)
    }

    /// Backpropagate a cotangent into the policy's gradient buffers.
    pub fn backprop(&self, policy: &mut GaussianPolicy, state: &[f64], cotangent: &[f64]) -> Result<()> {
        let g = self.head_gradient(cotangent)?;
        let s = ArrayView2::from_shape((1, state.len()), state).expect("row vector");
        let dm = ArrayView2::from_shape((1, g.d_mean.len()), &g.d_mean).expect("row vector");
        policy.accumulate_head_gradient(s, dm, &g.d_log_std)
    }
}

/// `-(m/2) ln(2π)`, the log-density of a standard normal at its mode.
pub fn standard_normal_mode_log_density(m: usize) -> f64 {
    -(m as f64) * 0.5 * (2.0 * PI).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_mean_policy(m: usize) -> GaussianPolicy {
        let spec = MlpSpec::new(1, &[], m).unwrap();
        let net = Network::with_params(spec.clone(), ParamStore::zeros(spec.param_count())).unwrap();
        GaussianPolicy::from_parts(net, vec![0.0; m]).unwrap()
    }

    fn constant_mean_policy(mean: &[f64], log_std: &[f64]) -> GaussianPolicy {
        let m = mean.len();
        let spec = MlpSpec::new(1, &[], m).unwrap();
        let mut values = vec![0.0; m];
        values.extend_from_slice(mean);
        let net = Network::with_params(spec, ParamStore::from_values(values).unwrap()).unwrap();
        GaussianPolicy::from_parts(net, log_std.to_vec()).unwrap()
    }

    #[test]
    fn mode_draw() {
        let p = zero_mean_policy(3);
        let s = p.sample_with_noise(&[0.0], vec![0.0; 3]).unwrap();
        assert_eq!(s.action, vec![0.0; 3]);
        assert!((s.log_prob - standard_normal_mode_log_density(3)).abs() < 1e-12);
    }

    #[test]
    fn affine_reparameterization() {
        let p = constant_mean_policy(&[1.0], &[2f64.ln()]);
        let s = p.sample_with_noise(&[0.0], vec![0.5]).unwrap();
        assert!((s.action[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn unit_gaussian_log_prob_at_one() {
        let p = zero_mean_policy(1);
        let lp = p.log_prob(&[0.0], &[1.0]).unwrap();
        assert!((lp - (-0.5 - 0.5 * (2.0 * PI).ln())).abs() < 1e-12);
        assert!((lp + 1.4189).abs() < 1e-4);
    }

    #[test]
    fn subspace_log_prob_ignores_other_dims() {
        let p = zero_mean_policy(2);
        let lp = p.log_prob_subspace(&[0.0], &[5.0, 0.0], &[1]).unwrap();
        assert!((lp + 0.918_938_533_204_672_7).abs() < 1e-12);
        let full = p.log_prob(&[0.0], &[5.0, 0.0]).unwrap();
        let all = p.log_prob_subspace(&[0.0], &[5.0, 0.0], &[0, 1]).unwrap();
        assert_eq!(full, all);
    }

    #[test]
    fn empty_subset_rejected() {
        let p = zero_mean_policy(2);
        assert!(matches!(p.log_prob_subspace(&[0.0], &[0.0, 0.0], &[]), Err(Error::EmptySubset)));
        assert!(matches!(
            p.reparam_action_subspace(&[0.0], &[0.0, 0.0], &[]),
            Err(Error::EmptySubset)
        ));
        assert!(p.reparam_action_subspace(&[0.0], &[0.0], &[0]).is_err());
    }

    #[test]
    fn subspace_action_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = GaussianPolicy::new(2, 2, &[3], &mut rng).unwrap();
        p.set_log_std(&[0.3, -0.2]).unwrap();
        let state = [0.4, -0.7];
        let noise = [0.8, -1.1];
        let sub = p.reparam_action_subspace(&state, &noise, &[0]).unwrap();

        p.zero_grads();
        sub.backprop(&mut p, &state, &[1.0, 0.0]).unwrap();
        let g0 = p.flat_grads();
        p.zero_grads();
        sub.backprop(&mut p, &state, &[0.0, 1.0]).unwrap();
        assert!(p.flat_grads().iter().all(|&g| g == 0.0));

        let theta = p.flat_params();
        let h = 1e-6;
        for k in 0..theta.len() {
            let mut q = p.clone();
            let mut t = theta.clone();
            t[k] += h;
            q.set_flat_params(&t).unwrap();
            let up = q.reparam_action_subspace(&state, &noise, &[0]).unwrap().value[0];
            t[k] -= 2.0 * h;
            q.set_flat_params(&t).unwrap();
            let dn = q.reparam_action_subspace(&state, &noise, &[0]).unwrap().value[0];
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - g0[k]).abs() < 1e-7, "param {k}: fd {fd} vs {}", g0[k]);
        }
    }

    #[test]
    fn score_matches_log_prob_finite_differences() {
        let p = constant_mean_policy(&[0.3, -0.4], &[0.1, -0.5]);
        let a = [1.0, 0.2];
        let g = p.score_subspace(&[0.0], &a, &[0, 1]).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut mu = [0.3, -0.4];
            mu[i] += h;
            let up = constant_mean_policy(&mu, &[0.1, -0.5]).log_prob(&[0.0], &a).unwrap();
            mu[i] -= 2.0 * h;
            let dn = constant_mean_policy(&mu, &[0.1, -0.5]).log_prob(&[0.0], &a).unwrap();
            assert!(((up - dn) / (2.0 * h) - g.d_mean[i]).abs() < 1e-7);
        }
    }
}
