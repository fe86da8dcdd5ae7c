//! Wide & deep advantage approximator
//! `A(s, a) = β_wide · (w0(s) + w1(s)ᵀa + aᵀ W(s)W(s)ᵀ a) + β_deep · D(s, a)`.
//!
//! The quadratic term is evaluated as `|W(s)ᵀa|²`. Its action Hessian is
//! `2 W Wᵀ`; the Gram matrix `W Wᵀ` itself is reported as the curvature
//! estimate.

use std::io::Write;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::funcapprox::{backward, forward_tape, Adam, AdamConfig, MlpSpec, Network};
use crate::util::{select_rows, Minibatcher, StateIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdvNetConfig {
    /// Hidden widths of the state networks w0, w1, w2.
    pub wide_hidden: Vec<usize>,
    /// Hidden widths of the deep `(s, a)` network.
    pub deep_hidden: Vec<usize>,
    /// Columns of `W(s)`; `None` means the action dimension.
    pub latent_dim: Option<usize>,
    pub beta_wide: f64,
    pub beta_deep: f64,
}

impl Default for AdvNetConfig {
    fn default() -> Self {
        Self {
            wide_hidden: vec![128],
            deep_hidden: vec![128, 128],
            latent_dim: None,
            beta_wide: -1.0,
            beta_deep: 1.0,
        }
    }
}

/// Batch mean of `W(s) W(s)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianEstimate {
    pub matrix: Array2<f64>,
    pub n_states: usize,
}

impl HessianEstimate {
    /// One CSV row per matrix row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for row in self.matrix.rows() {
            w.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// State-only wide coefficients for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct WideTerms {
    pub w0: f64,
    pub w1: Array1<f64>,
    /// `m × latent` factor matrix.
    pub w2: Array2<f64>,
}

impl WideTerms {
    pub fn gram(&self) -> Array2<f64> {
        self.w2.dot(&self.w2.t())
    }

    pub fn value(&self, action: ArrayView1<f64>) -> f64 {
        let z = self.w2.t().dot(&action);
        self.w0 + self.w1.dot(&action) + z.dot(&z)
    }

    /// `w1 + 2 W Wᵀ a`.
    pub fn action_gradient(&self, action: ArrayView1<f64>) -> Array1<f64> {
        let z = self.w2.t().dot(&action);
        &self.w1 + &(self.w2.dot(&z) * 2.0)
    }
}

/// Baseline quantities for a batch at fixed parameters, consumed by the
/// policy-gradient estimators.
#[derive(Debug, Clone)]
pub struct BaselineBatch {
    /// `c(s_i, a_i)`.
    pub values: Vec<f64>,
    pub state_ids: Vec<usize>,
    /// Per distinct state.
    pub w1: Array2<f64>,
    /// Per distinct state, `W Wᵀ`.
    pub gram: Vec<Array2<f64>>,
    /// `∇_a D(s_i, a_i)`, one row per sample.
    pub deep_action_grad: Array2<f64>,
    pub beta_wide: f64,
    pub beta_deep: f64,
}

impl BaselineBatch {
    /// A baseline that is identically zero.
    pub fn zero(batch_len: usize, action_dim: usize) -> Self {
        Self {
            values: vec![0.0; batch_len],
            state_ids: vec![0; batch_len],
            w1: Array2::zeros((1, action_dim)),
            gram: vec![Array2::zeros((action_dim, action_dim))],
            deep_action_grad: Array2::zeros((batch_len, action_dim)),
            beta_wide: 0.0,
            beta_deep: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn action_dim(&self) -> usize {
        self.w1.ncols()
    }
}

#[derive(Debug, Clone)]
pub struct WideDeepAdvNet {
    state_dim: usize,
    action_dim: usize,
    latent_dim: usize,
    pub w0: Network,
    pub w1: Network,
    pub w2: Network,
    pub deep: Network,
    beta_wide: f64,
    beta_deep: f64,
}

/// One Adam state per sub-network.
#[derive(Debug, Clone)]
pub struct AdvNetOptimizer {
    w0: Adam,
    w1: Adam,
    w2: Adam,
    deep: Adam,
}

impl AdvNetOptimizer {
    pub fn step_count(&self) -> u64 {
        self.w0.step_count()
    }
}

impl WideDeepAdvNet {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, config: &AdvNetConfig, rng: &mut R) -> Result<Self> {
        let latent_dim = config.latent_dim.unwrap_or(action_dim);
        if latent_dim == 0 {
            return Err(Error::InvalidArgument("latent_dim must be >= 1".into()));
        }
        if !config.beta_wide.is_finite() || !config.beta_deep.is_finite() {
            return Err(Error::NonFinite("advantage net weights"));
        }
        let w0 = Network::new(MlpSpec::new(state_dim, &config.wide_hidden, 1)?, rng);
        let w1 = Network::new(MlpSpec::new(state_dim, &config.wide_hidden, action_dim)?, rng);
        let w2 = Network::new(MlpSpec::new(state_dim, &config.wide_hidden, action_dim * latent_dim)?, rng);
        let deep = Network::new(MlpSpec::new(state_dim + action_dim, &config.deep_hidden, 1)?, rng);
        Ok(Self {
            state_dim,
            action_dim,
            latent_dim,
            w0,
            w1,
            w2,
            deep,
            beta_wide: config.beta_wide,
            beta_deep: config.beta_deep,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn beta_wide(&self) -> f64 {
        self.beta_wide
    }

    pub fn beta_deep(&self) -> f64 {
        self.beta_deep
    }

    pub fn set_betas(&mut self, beta_wide: f64, beta_deep: f64) {
        self.beta_wide = beta_wide;
        self.beta_deep = beta_deep;
    }

    pub fn param_count(&self) -> usize {
        self.w0.params.len() + self.w1.params.len() + self.w2.params.len() + self.deep.params.len()
    }

    pub fn optimizer(&self, config: AdamConfig) -> Result<AdvNetOptimizer> {
        Ok(AdvNetOptimizer {
            w0: Adam::new(config.clone(), self.w0.params.len())?,
            w1: Adam::new(config.clone(), self.w1.params.len())?,
            w2: Adam::new(config.clone(), self.w2.params.len())?,
            deep: Adam::new(config, self.deep.params.len())?,
        })
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        check_len("advantage net state", self.state_dim, state.len())
    }

    fn check_action(&self, action: &[f64]) -> Result<()> {
        check_len("advantage net action", self.action_dim, action.len())
    }

    pub fn wide_terms(&self, state: &[f64]) -> Result<WideTerms> {
        self.check_state(state)?;
        let w0 = self.w0.forward(state)?[0];
        let w1 = Array1::from(self.w1.forward(state)?);
        let w2 = Array2::from_shape_vec((self.action_dim, self.latent_dim), self.w2.forward(state)?)
            .expect("w2 output has m * latent entries");
        Ok(WideTerms { w0, w1, w2 })
    }

    /// `w0 + w1ᵀa + Σ_ij (W Wᵀ)_ij a_i a_j` (without `β_wide`).
    pub fn wide_forward(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        self.check_action(action)?;
        Ok(self.wide_terms(state)?.value(ArrayView1::from(action)))
    }

    /// Deep component `D(s, a)` (without `β_deep`).
    pub fn deep_forward(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        self.check_state(state)?;
        self.check_action(action)?;
        let input: Vec<f64> = state.iter().chain(action).copied().collect();
        Ok(self.deep.forward(&input)?[0])
    }

    /// Full model value; this is the baseline `c(s, a)`.
    pub fn evaluate_baseline(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.beta_wide * self.wide_forward(state, action)? + self.beta_deep * self.deep_forward(state, action)?)
    }

    /// `∇_a c(s, a)`.
    pub fn action_gradient(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        self.check_action(action)?;
        let wide = self.wide_terms(state)?.action_gradient(ArrayView1::from(action));
        let input: Vec<f64> = state.iter().chain(action).copied().collect();
        let x = ArrayView2::from_shape((1, input.len()), &input).expect("row vector");
        let deep = self.deep_input_gradient(x)?;
        Ok((0..self.action_dim)
            .map(|i| self.beta_wide * wide[i] + self.beta_deep * deep[[0, self.state_dim + i]])
            .collect())
    }

    fn deep_input_gradient(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        let spec = self.deep.spec();
        let params = self.deep.params.values();
        let tape = forward_tape(spec, params, inputs)?;
        let mut scratch = vec![0.0; params.len()];
        backward(spec, params, &tape, Array2::ones((inputs.nrows(), 1)).view(), &mut scratch)
    }

    fn join(states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Array2<f64> {
        ndarray::concatenate(Axis(1), &[states, actions]).expect("row counts checked by caller")
    }

    fn check_batch(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<()> {
        check_len("advantage net state dim", self.state_dim, states.ncols())?;
        check_len("advantage net action dim", self.action_dim, actions.ncols())?;
        check_len("advantage net batch rows", states.nrows(), actions.nrows())
    }

    /// Batched `c(s_i, a_i)`.
    pub fn predict(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.evaluate_batch(states, actions, false)?.values)
    }

    /// Everything the estimators need at the sampled actions.
    pub fn baseline_batch(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<BaselineBatch> {
        self.evaluate_batch(states, actions, true)
    }

    fn evaluate_batch(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>, with_grad: bool) -> Result<BaselineBatch> {
        self.check_batch(states, actions)?;
        let index = StateIndex::build(states);
        let w0 = self.w0.forward_batch(index.unique.view())?;
        let w1 = self.w1.forward_batch(index.unique.view())?;
        let w2 = self.w2.forward_batch(index.unique.view())?;
        let factors: Vec<Array2<f64>> = w2
            .rows()
            .into_iter()
            .map(|r| r.to_owned().into_shape_with_order((self.action_dim, self.latent_dim)).expect("w2 row reshapes"))
            .collect();
        let joint = Self::join(states, actions);
        let (deep, deep_action_grad) = if with_grad {
            let spec = self.deep.spec();
            let params = self.deep.params.values();
            let tape = forward_tape(spec, params, joint.view())?;
            let mut scratch = vec![0.0; params.len()];
            let dx = backward(spec, params, &tape, Array2::ones((joint.nrows(), 1)).view(), &mut scratch)?;
            (tape.output().clone(), dx.slice(s![.., self.state_dim..]).to_owned())
        } else {
            (self.deep.forward_batch(joint.view())?, Array2::zeros((0, self.action_dim)))
        };
        let values = actions
            .rows()
            .into_iter()
            .zip(&index.ids)
            .enumerate()
            .map(|(i, (a, &id))| {
                let z = factors[id].t().dot(&a);
                let wide = w0[[id, 0]] + w1.row(id).dot(&a) + z.dot(&z);
                self.beta_wide * wide + self.beta_deep * deep[[i, 0]]
            })
            .collect();
        Ok(BaselineBatch {
            values,
            state_ids: index.ids,
            w1,
            gram: factors.iter().map(|f| f.dot(&f.t())).collect(),
            deep_action_grad,
            beta_wide: self.beta_wide,
            beta_deep: self.beta_deep,
        })
    }

    /// Mean of `W(s) W(s)ᵀ` over the rows of `states`, forward passes only.
    pub fn hessian(&self, states: ArrayView2<f64>) -> Result<HessianEstimate> {
        if states.nrows() == 0 {
            return Err(Error::InvalidArgument("hessian needs at least one state".into()));
        }
        check_len("advantage net state dim", self.state_dim, states.ncols())?;
        let index = StateIndex::build(states);
        let w2 = self.w2.forward_batch(index.unique.view())?;
        let mut counts = vec![0usize; index.len()];
        for &id in &index.ids {
            counts[id] += 1;
        }
        let mut matrix = Array2::zeros((self.action_dim, self.action_dim));
        for (row, &n) in w2.rows().into_iter().zip(&counts) {
            let f = row.to_owned().into_shape_with_order((self.action_dim, self.latent_dim)).expect("w2 row reshapes");
            matrix.scaled_add(n as f64 / states.nrows() as f64, &f.dot(&f.t()));
        }
        Ok(HessianEstimate {
            matrix,
            n_states: states.nrows(),
        })
    }

    /// Mean squared error against `targets`.
    pub fn loss(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>, targets: &[f64]) -> Result<f64> {
        check_len("advantage targets", states.nrows(), targets.len())?;
        let pred = self.predict(states, actions)?;
        Ok(pred.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / targets.len().max(1) as f64)
    }

    /// One gradient step on the squared error of a minibatch; returns the
    /// minibatch loss before the step.
    pub fn train_step(
        &mut self,
        opt: &mut AdvNetOptimizer,
        states: ArrayView2<f64>,
        actions: ArrayView2<f64>,
        targets: &[f64],
    ) -> Result<f64> {
        self.check_batch(states, actions)?;
        check_len("advantage targets", states.nrows(), targets.len())?;
        let b = states.nrows();
        let (m, l) = (self.action_dim, self.latent_dim);
        let index = StateIndex::build(states);
        let u = index.unique.view();
        let w0 = self.w0.forward_train(u)?;
        let w1 = self.w1.forward_train(u)?;
        let w2 = self.w2.forward_train(u)?;
        let joint = Self::join(states, actions);
        let deep = self.deep.forward_train(joint.view())?;

        let mut g0 = Array2::zeros(w0.raw_dim());
        let mut g1 = Array2::zeros(w1.raw_dim());
        let mut g2 = Array2::zeros(w2.raw_dim());
        let mut gd = Array2::zeros(deep.raw_dim());
        let mut loss = 0.0;
        for (i, (a, &id)) in actions.rows().into_iter().zip(&index.ids).enumerate() {
            let f = w2.row(id).into_shape_with_order((m, l)).expect("w2 row reshapes");
            let z = f.t().dot(&a);
            let wide = w0[[id, 0]] + w1.row(id).dot(&a) + z.dot(&z);
            let err = self.beta_wide * wide + self.beta_deep * deep[[i, 0]] - targets[i];
            loss += err * err;
            let g = 2.0 * err / b as f64;
            let gw = self.beta_wide * g;
            g0[[id, 0]] += gw;
            g1.row_mut(id).scaled_add(gw, &a);
            let mut gf = g2.row_mut(id).into_shape_with_order((m, l)).expect("w2 row reshapes");
            for p in 0..m {
                for q in 0..l {
                    gf[[p, q]] += 2.0 * gw * a[p] * z[q];
                }
            }
            gd[[i, 0]] = self.beta_deep * g;
        }
        self.w0.backward(g0.view())?;
        self.w1.backward(g1.view())?;
        self.w2.backward(g2.view())?;
        self.deep.backward(gd.view())?;
        for net in [&mut self.w0, &mut self.w1, &mut self.w2, &mut self.deep] {
            net.clear_tape();
        }
        opt.w0.step(&mut self.w0.params)?;
        opt.w1.step(&mut self.w1.params)?;
        opt.w2.step(&mut self.w2.params)?;
        opt.deep.step(&mut self.deep.params)?;
        Ok(loss / b as f64)
    }

    /// `steps` minibatch steps of squared-error regression onto `targets`.
    /// Returns the per-step minibatch losses.
    #[allow(clippy::too_many_arguments)]
    pub fn fit<R: Rng + ?Sized>(
        &mut self,
        opt: &mut AdvNetOptimizer,
        states: ArrayView2<f64>,
        actions: ArrayView2<f64>,
        targets: &[f64],
        steps: usize,
        minibatch: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.check_batch(states, actions)?;
        check_len("advantage targets", states.nrows(), targets.len())?;
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("advantage targets"));
        }
        let mut batches = Minibatcher::new(states.nrows(), minibatch);
        let mut losses = Vec::with_capacity(steps);
        for _ in 0..steps {
            let rows = batches.next(rng).to_vec();
            let s = select_rows(states, &rows);
            let a = select_rows(actions, &rows);
            let t: Vec<f64> = rows.iter().map(|&r| targets[r]).collect();
            losses.push(self.train_step(opt, s.view(), a.view(), &t)?);
        }
        Ok(losses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn small(m: usize) -> WideDeepAdvNet {
        let config = AdvNetConfig {
            wide_hidden: vec![6],
            deep_hidden: vec![5, 4],
            ..AdvNetConfig::default()
        };
        WideDeepAdvNet::new(1, m, &config, &mut ChaCha8Rng::seed_from_u64(11)).unwrap()
    }

    /// Zero hidden weights so each state net outputs its final bias.
    fn set_constant_output(net: &mut Network, bias: &[f64]) {
        let n = net.params.len();
        let values = net.params.values_mut();
        values.iter_mut().for_each(|v| *v = 0.0);
        values[n - bias.len()..].copy_from_slice(bias);
    }

    #[test]
    fn fm_reference_value() {
        let mut net = WideDeepAdvNet::new(
            1,
            2,
            &AdvNetConfig {
                wide_hidden: vec![3],
                deep_hidden: vec![3],
                latent_dim: Some(1),
                ..AdvNetConfig::default()
            },
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        set_constant_output(&mut net.w0, &[0.0]);
        set_constant_output(&mut net.w1, &[1.0, 0.0]);
        set_constant_output(&mut net.w2, &[1.0, 2.0]);
        assert_eq!(net.wide_forward(&[1.0], &[1.0, 1.0]).unwrap(), 10.0);
        assert_eq!(net.wide_forward(&[1.0], &[0.0, 0.0]).unwrap(), 0.0);
        let h = net.hessian(array![[1.0], [0.3]].view()).unwrap();
        assert_eq!(h.matrix, array![[1.0, 2.0], [2.0, 4.0]]);
        set_constant_output(&mut net.w2, &[0.0, 0.0]);
        assert_eq!(net.hessian(array![[1.0]].view()).unwrap().matrix, Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn zero_action_gives_w0() {
        let net = small(3);
        let t = net.wide_terms(&[1.0]).unwrap();
        assert_eq!(net.wide_forward(&[1.0], &[0.0; 3]).unwrap(), t.w0);
    }

    #[test]
    fn finite_difference_action_hessian_is_twice_gram() {
        let net = small(3);
        let s = [0.7];
        let a = [0.2, -0.4, 0.9];
        let gram = net.hessian(array![[0.7]].view()).unwrap().matrix;
        let h = 1e-4;
        let f = |a: &[f64]| net.wide_forward(&s, a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let shift = |di: f64, dj: f64| {
                    let mut x = a;
                    x[i] += di;
                    x[j] += dj;
                    f(&x)
                };
                let fd = (shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h);
                let exact = 2.0 * gram[[i, j]];
                assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{i},{j}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn action_gradient_matches_finite_differences() {
        let net = small(3);
        let s = [1.0];
        let a = [0.5, -0.1, 0.3];
        let g = net.action_gradient(&s, &a).unwrap();
        let t = net.wide_terms(&s).unwrap().action_gradient(ArrayView1::from(&a));
        let h = 1e-6;
        for i in 0..3 {
            let mut p = a;
            let mut q = a;
            p[i] += h;
            q[i] -= h;
            let fd = (net.evaluate_baseline(&s, &p).unwrap() - net.evaluate_baseline(&s, &q).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1e-2));
            let fdw = (net.wide_forward(&s, &p).unwrap() - net.wide_forward(&s, &q).unwrap()) / (2.0 * h);
            assert!((fdw - t[i]).abs() <= 1e-6 * t[i].abs().max(1e-2));
        }
    }

    #[test]
    fn batch_matches_scalar_paths() {
        let net = small(2);
        let states = array![[1.0], [1.0], [0.5]];
        let actions = array![[0.1, 0.2], [-0.3, 0.4], [0.0, 1.0]];
        let batch = net.baseline_batch(states.view(), actions.view()).unwrap();
        for i in 0..3 {
            let s = states.row(i).to_vec();
            let a = actions.row(i).to_vec();
            assert!((batch.values[i] - net.evaluate_baseline(&s, &a).unwrap()).abs() < 1e-12);
        }
        assert_eq!(batch.gram.len(), 2);
    }

    #[test]
    fn train_step_gradient_matches_finite_differences() {
        let net = small(2);
        let states = array![[1.0], [1.0], [0.2]];
        let actions = array![[0.3, -0.7], [1.1, 0.4], [-0.5, 0.2]];
        let targets = [0.4, -1.0, 2.0];
        // With both moment decays ≈ 0 the first Adam step is ≈ -lr · sign(g).
        let sgd = AdamConfig {
            learning_rate: 1e-7,
            beta1: 1e-12,
            beta2: 1e-12,
            epsilon: 1e-300,
        };
        let mut trained = net.clone();
        let mut opt = trained.optimizer(sgd).unwrap();
        trained.train_step(&mut opt, states.view(), actions.view(), &targets).unwrap();
        let loss = |n: &WideDeepAdvNet| n.loss(states.view(), actions.view(), &targets).unwrap();
        for (name, before, after) in [("w2", &net.w2, &trained.w2), ("deep", &net.deep, &trained.deep)] {
            for k in 0..before.params.len() {
                let step = after.params.values()[k] - before.params.values()[k];
                let mut probe = net.clone();
                let h = 1e-6;
                let sub = match name {
                    "w2" => &mut probe.w2,
                    _ => &mut probe.deep,
                };
                sub.params.values_mut()[k] += h;
                let up = loss(&probe);
                let sub = match name {
                    "w2" => &mut probe.w2,
                    _ => &mut probe.deep,
                };
                sub.params.values_mut()[k] -= 2.0 * h;
                let fd = (up - loss(&probe)) / (2.0 * h);
                if fd.abs() > 1e-5 {
                    assert_eq!(step.signum(), -fd.signum(), "{name}[{k}]");
                }
            }
        }
    }

    #[test]
    fn fits_one_dimensional_curvature() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let config = AdvNetConfig {
            wide_hidden: vec![16],
            deep_hidden: vec![16, 16],
            ..AdvNetConfig::default()
        };
        let mut net = WideDeepAdvNet::new(1, 1, &config, &mut rng).unwrap();
        let n = 512;
        let actions = Array2::from_shape_simple_fn((n, 1), || rng.sample::<f64, _>(StandardNormal));
        let states = Array2::from_elem((n, 1), 1.0);
        let targets: Vec<f64> = actions.iter().map(|a| -a * a).collect();
        // Least-squares fit of t = c0 + c1 a + c2 a² (normal equations).
        let mut ata = [[0.0f64; 3]; 3];
        let mut atb = [0.0f64; 3];
        for (a, t) in actions.iter().zip(&targets) {
            let phi = [1.0, *a, a * a];
            for i in 0..3 {
                atb[i] += phi[i] * t;
                for j in 0..3 {
                    ata[i][j] += phi[i] * phi[j];
                }
            }
        }
        let c2 = solve3(ata, atb)[2];
        let mut opt = net.optimizer(AdamConfig::with_lr(3e-3)).unwrap();
        net.fit(&mut opt, states.view(), actions.view(), &targets, 1500, 128, &mut rng).unwrap();
        let fitted = net.beta_wide() * net.hessian(states.view()).unwrap().matrix[[0, 0]];
        assert!((fitted - c2).abs() <= 0.25 * c2.abs(), "fitted {fitted} vs oracle {c2}");
    }

    fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
        for col in 0..3 {
            let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for r in col + 1..3 {
                let f = a[r][col] / a[col][col];
                for c in col..3 {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = [0.0; 3];
        for r in (0..3).rev() {
            x[r] = (b[r] - (r + 1..3).map(|c| a[r][c] * x[c]).sum::<f64>()) / a[r][r];
        }
        x
    }

    #[test]
    fn zero_targets_stay_small() {
        let mut net = small(2);
        set_constant_output(&mut net.w0, &[0.0]);
        set_constant_output(&mut net.w1, &[0.0, 0.0]);
        set_constant_output(&mut net.w2, &[0.0; 4]);
        set_constant_output(&mut net.deep, &[0.0]);
        let states = Array2::from_elem((8, 1), 1.0);
        let actions = Array2::from_shape_fn((8, 2), |(i, j)| (i as f64 - 4.0) * 0.1 + j as f64);
        let zeros = vec![0.0; 8];
        let before = net.loss(states.view(), actions.view(), &zeros).unwrap();
        let mut opt = net.optimizer(AdamConfig::default()).unwrap();
        net.fit(&mut opt, states.view(), actions.view(), &zeros, 5, 8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(net.loss(states.view(), actions.view(), &zeros).unwrap() <= before + 1e-12);
    }

    #[test]
    fn errors() {
        let mut net = small(2);
        assert!(net.hessian(Array2::zeros((0, 1)).view()).is_err());
        assert!(net.wide_forward(&[1.0], &[0.0]).is_err());
        let mut opt = net.optimizer(AdamConfig::default()).unwrap();
        let s = Array2::from_elem((2, 1), 1.0);
        let a = Array2::zeros((2, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(net.fit(&mut opt, s.view(), a.view(), &[0.0, f64::INFINITY], 1, 2, &mut rng).is_err());
    }
}
