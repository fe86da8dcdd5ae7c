use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
        }
    }
}

/// Shape of a fully connected network. Hidden layers use `activation`; the
/// output layer is affine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: &[usize], output_dim: usize) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden_dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "network dims must be >= 1 (input {input_dim}, hidden {hidden_dims:?}, output {output_dim})"
            )));
        }
        Ok(Self {
            input_dim,
            hidden_dims: hidden_dims.to_vec(),
            output_dim,
            activation: Activation::Tanh,
        })
    }

    /// `(fan_in, fan_out)` for every affine layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamStore {
        let mut values = Vec::with_capacity(self.param_count());
        for (fan_in, fan_out) in self.layer_dims() {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            values.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)));
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        ParamStore::from_values(values).expect("glorot init is finite")
    }
}

/// Activations recorded by a forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    /// `layers[0]` is the input, `layers[l]` the output of affine layer `l`
    /// after its activation (the final entry is the network output).
    layers: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.layers.last().expect("tape always holds the input")
    }

    pub fn batch_size(&self) -> usize {
        self.layers[0].nrows()
    }
}

fn check_params(spec: &MlpSpec, params: &[f64]) -> Result<()> {
    check_len("mlp parameter count", spec.param_count(), params.len())
}

fn layer_views<'a>(
    params: &'a [f64],
    offset: usize,
    fan_in: usize,
    fan_out: usize,
) -> (ArrayView2<'a, f64>, &'a [f64]) {
    let w_len = fan_in * fan_out;
    let w = ArrayView2::from_shape((fan_in, fan_out), &params[offset..offset + w_len])
        .expect("layer slice matches its shape");
    let b = &params[offset + w_len..offset + w_len + fan_out];
    (w, b)
}

fn run_forward(
    spec: &MlpSpec,
    params: &[f64],
    input: ArrayView2<f64>,
    keep: bool,
) -> Result<(Array2<f64>, Vec<Array2<f64>>)> {
    check_params(spec, params)?;
    check_len("mlp input", spec.input_dim, input.ncols())?;
    let dims = spec.layer_dims();
    let last = dims.len() - 1;
    let mut kept: Vec<Array2<f64>> = Vec::with_capacity(if keep { dims.len() + 1 } else { 0 });
    let mut current: Option<Array2<f64>> = None;
    if keep {
        kept.push(input.to_owned());
    }
    let mut offset = 0;
    for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let (w, b) = layer_views(params, offset, fan_in, fan_out);
        let mut z = match (keep, &current) {
            (true, _) => kept[l].dot(&w),
            (false, Some(x)) => x.dot(&w),
            (false, None) => input.dot(&w),
        };
        for mut row in z.rows_mut() {
            for (zj, bj) in row.iter_mut().zip(b) {
                *zj += bj;
            }
        }
        if l != last {
            z.mapv_inplace(|v| spec.activation.apply(v));
        }
        if keep {
            kept.push(z);
        } else {
            current = Some(z);
        }
        offset += fan_in * fan_out + fan_out;
    }
    // With a tape the output is its last entry; callers read it from there.
    let out = if keep {
        Array2::zeros((0, 0))
    } else {
        current.expect("at least one layer")
    };
    Ok((out, kept))
}

/// Batched forward pass: `input` is `(batch, input_dim)`.
pub fn forward(spec: &MlpSpec, params: &[f64], input: ArrayView2<f64>) -> Result<Array2<f64>> {
    run_forward(spec, params, input, false).map(|(y, _)| y)
}

/// Forward pass that records what [`backward`] needs.
pub fn forward_tape(spec: &MlpSpec, params: &[f64], input: ArrayView2<f64>) -> Result<Tape> {
    run_forward(spec, params, input, true).map(|(_, layers)| Tape { layers })
}

/// Reverse pass. Accumulates `d(sum(output_grad ⊙ output))/d params` into
/// `grads` and returns the gradient with respect to the input batch.
pub fn backward(
    spec: &MlpSpec,
    params: &[f64],
    tape: &Tape,
    output_grad: ArrayView2<f64>,
    grads: &mut [f64],
) -> Result<Array2<f64>> {
    check_params(spec, params)?;
    check_len("mlp gradient buffer", params.len(), grads.len())?;
    check_len("output gradient width", spec.output_dim, output_grad.ncols())?;
    check_len("output gradient rows", tape.batch_size(), output_grad.nrows())?;
    let dims = spec.layer_dims();
    check_len("tape depth", dims.len() + 1, tape.layers.len())?;

    let mut offsets = Vec::with_capacity(dims.len());
    let mut offset = 0;
    for &(fan_in, fan_out) in &dims {
        offsets.push(offset);
        offset += fan_in * fan_out + fan_out;
    }

    let last = dims.len() - 1;
    let mut delta = output_grad.to_owned();
    for l in (0..dims.len()).rev() {
        let (fan_in, fan_out) = dims[l];
        if l != last {
            let h = &tape.layers[l + 1];
            delta.zip_mut_with(h, |d, &hv| *d *= spec.activation.derivative_from_output(hv));
        }
        let x = &tape.layers[l];
        let off = offsets[l];
        let w_len = fan_in * fan_out;
        {
            let (gw, gb) = grads[off..off + w_len + fan_out].split_at_mut(w_len);
            let mut gw = ArrayViewMut2::from_shape((fan_in, fan_out), gw)
                .expect("gradient slice matches its shape");
            general_mat_mul(1.0, &x.t(), &delta, 1.0, &mut gw);
            for (g, s) in gb.iter_mut().zip(delta.sum_axis(Axis(0))) {
                *g += s;
            }
        }
        let (w, _) = layer_views(params, off, fan_in, fan_out);
        delta = delta.dot(&w.t());
    }
    Ok(delta)
}

/// A network that owns its parameters and remembers its last training
/// forward pass.
#[derive(Debug, Clone)]
pub struct Network {
    spec: MlpSpec,
    pub params: ParamStore,
    tape: Option<Tape>,
}

impl Network {
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let params = spec.init_params(rng);
        Self {
            spec,
            params,
            tape: None,
        }
    }

    pub fn with_params(spec: MlpSpec, params: ParamStore) -> Result<Self> {
        check_params(&spec, params.values())?;
        Ok(Self {
            spec,
            params,
            tape: None,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        forward(&self.spec, self.params.values(), input)
    }

    /// Forward pass whose activations are kept for the next [`Self::backward`].
    pub fn forward_train(&mut self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        let tape = forward_tape(&self.spec, self.params.values(), input)?;
        let out = tape.output().clone();
        self.tape = Some(tape);
        Ok(out)
    }

    /// Accumulate parameter gradients for the recorded forward pass and return
    /// the input gradient.
    pub fn backward(&mut self, output_grad: ArrayView2<f64>) -> Result<Array2<f64>> {
        let tape = self.tape.as_ref().ok_or(Error::NoForwardPass)?;
        let (values, grads) = self.params.split_mut();
        backward(&self.spec, values, tape, output_grad, grads)
    }

    pub fn clear_tape(&mut self) {
        self.tape = None;
    }
}
