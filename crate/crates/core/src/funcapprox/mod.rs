//! Dense feed-forward networks with hand-written reverse mode, plus Adam.
//!
//! Parameters live in flat [`ParamStore`]s so that composite models (policy,
//! value, wide & deep advantage net) can be optimized and checkpointed
//! uniformly. Batches are row-major `(batch, features)` matrices.

mod checkpoint;
mod mlp;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use mlp::{backward, forward, forward_tape, Activation, MlpSpec, Network, Tape};
pub use optim::{Adam, AdamConfig};

use ndarray::ArrayView2;
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::util::{select_rows, Minibatcher, StateIndex};

/// Flat parameter vector with a gradient buffer of the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    values: Vec<f64>,
    grads: Vec<f64>,
}

impl ParamStore {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            grads: vec![0.0; len],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter values"));
        }
        let grads = vec![0.0; values.len()];
        Ok(Self { values, grads })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut [f64] {
        &mut self.grads
    }

    /// Split borrow used by backward passes: read values, accumulate grads.
    pub fn split_mut(&mut self) -> (&[f64], &mut [f64]) {
        (&self.values, &mut self.grads)
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Add `scale * delta` to the gradient buffer.
    pub fn accumulate_grads(&mut self, delta: &[f64], scale: f64) -> Result<()> {
        check_len("gradient accumulation", self.grads.len(), delta.len())?;
        for (g, d) in self.grads.iter_mut().zip(delta) {
            *g += scale * d;
        }
        Ok(())
    }
}

/// Mean squared error of `net` on `(inputs, targets)`.
pub fn mse(net: &Network, inputs: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<f64> {
    let pred = net.forward_batch(inputs)?;
    check_len("regression targets", pred.len(), targets.len())?;
    Ok((&pred - &targets).mapv(|e| e * e).mean().unwrap_or(0.0))
}

/// `steps` Adam steps on the minibatch squared error. Returns the loss of
/// each minibatch before its step. Repeated input rows share one forward
/// pass.
pub fn fit_mse<R: Rng + ?Sized>(
    net: &mut Network,
    adam: &mut Adam,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    steps: usize,
    minibatch: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_len("regression rows", inputs.nrows(), targets.nrows())?;
    check_len("regression width", net.spec().output_dim, targets.ncols())?;
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("regression targets"));
    }
    let mut batches = Minibatcher::new(inputs.nrows(), minibatch);
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let rows = batches.next(rng);
        let index = StateIndex::build(select_rows(inputs, rows).view());
        let y = select_rows(targets, rows);
        let pred = net.forward_train(index.unique.view())?;
        let mut err = y;
        for (mut e, &id) in err.rows_mut().into_iter().zip(&index.ids) {
            e.zip_mut_with(&pred.row(id), |t, p| *t = p - *t);
        }
        losses.push(err.mapv(|e| e * e).mean().unwrap_or(0.0));
        let scale = 2.0 / err.len() as f64;
        err.mapv_inplace(|e| e * scale);
        net.backward(index.reduce(err.view()).view())?;
        net.clear_tape();
        adam.step(&mut net.params)?;
    }
    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn regression_fit_reduces_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Network::new(MlpSpec::new(1, &[16], 1).unwrap(), &mut rng);
        let x = Array2::from_shape_fn((64, 1), |(i, _)| i as f64 / 32.0 - 1.0);
        let y = x.mapv(|v| 0.5 * v + 0.25);
        let before = mse(&net, x.view(), y.view()).unwrap();
        let mut adam = Adam::new(AdamConfig::with_lr(1e-2), net.params.len()).unwrap();
        fit_mse(&mut net, &mut adam, x.view(), y.view(), 200, 16, &mut rng).unwrap();
        assert!(mse(&net, x.view(), y.view()).unwrap() < 0.1 * before);
    }

    #[test]
    fn non_finite_targets_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Network::new(MlpSpec::new(1, &[2], 1).unwrap(), &mut rng);
        let mut adam = Adam::new(AdamConfig::default(), net.params.len()).unwrap();
        let x = Array2::zeros((2, 1));
        let y = Array2::from_elem((2, 1), f64::NAN);
        assert!(fit_mse(&mut net, &mut adam, x.view(), y.view(), 1, 2, &mut rng).is_err());
    }
}
