//! Dense layers and multi-layer perceptrons with hand-written backprop.
//!
//! Weights are stored `in × out` so a batch `X` (rows = samples) maps to
//! `act(X·W + b)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::rng::SeededRng;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the pre-activation value.
    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => {
                let s = sigmoid(pre);
                s * (1.0 - s)
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Glorot-uniform initialized matrix.
pub fn glorot(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..=limit))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::shape("DenseLayer::new", weight.cols(), bias.len()));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn glorot(inputs: usize, outputs: usize, activation: Activation, rng: &mut SeededRng) -> Self {
        Self {
            weight: glorot(inputs, outputs, rng),
            bias: vec![0.0; outputs],
            activation,
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    fn pre_activation(&self, x: &Matrix) -> Result<Matrix> {
        let mut pre = x.matmul(&self.weight)?;
        for i in 0..pre.rows() {
            for (v, b) in pre.row_mut(i).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(pre)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients for every layer of an [`Mlp`], in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<DenseGrads>,
}

impl MlpGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|g| [g.weight.data(), g.bias.as_slice()])
            .collect()
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.layers {
            g.weight.scale(s);
            g.bias.iter_mut().for_each(|b| *b *= s);
        }
    }
}

/// Activation record from [`Mlp::forward`], consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    revision: u64,
    dims: Vec<(usize, usize)>,
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    /// Bumped whenever parameters are handed out mutably, so a cache taken
    /// before an update is recognised as stale.
    #[serde(skip)]
    revision: u64,
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("Mlp needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(
                    "Mlp::new",
                    format!("layer {} input dim {}", i + 1, pair[0].out_dim()),
                    pair[1].in_dim(),
                ));
            }
        }
        Ok(Self {
            layers,
            revision: 0,
        })
    }

    /// Builds `sizes[0] → sizes[1] → … → sizes[last]` with `hidden` activation
    /// on every layer but the last, which uses `output`.
    pub fn glorot(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidArgument(
                "an MLP needs an input and an output size".into(),
            ));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidArgument("layer sizes must be > 0".into()));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { hidden };
                DenseLayer::glorot(sizes[i], sizes[i + 1], act, rng)
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.data().len() + l.bias.len()).sum()
    }

    /// Weight and bias buffers of each layer in order (weight, bias, weight, …).
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.revision += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data().len(), l.bias.len()])
            .collect()
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, MlpCache)> {
        if batch.cols() != self.in_dim() {
            return Err(Error::shape("mlp_forward", self.in_dim(), batch.cols()));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for layer in &self.layers {
            let p = layer.pre_activation(&x)?;
            let mut out = p.clone();
            if layer.activation != Activation::Identity {
                out.data_mut()
                    .iter_mut()
                    .for_each(|v| *v = layer.activation.apply(*v));
            }
            inputs.push(x);
            pre.push(p);
            x = out;
        }
        let cache = MlpCache {
            revision: self.revision,
            dims: self.layers.iter().map(|l| (l.in_dim(), l.out_dim())).collect(),
            inputs,
            pre,
        };
        Ok((x, cache))
    }

    /// Forward pass without keeping activations.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.in_dim() {
            return Err(Error::shape("mlp_forward", self.in_dim(), batch.cols()));
        }
        let mut x = self.layers[0].pre_activation(batch)?;
        apply_inplace(&mut x, self.layers[0].activation);
        for layer in &self.layers[1..] {
            x = layer.pre_activation(&x)?;
            apply_inplace(&mut x, layer.activation);
        }
        Ok(x)
    }

    pub fn backward(&self, cache: &MlpCache, grad_output: &Matrix) -> Result<(Matrix, MlpGrads)> {
        let dims: Vec<(usize, usize)> =
            self.layers.iter().map(|l| (l.in_dim(), l.out_dim())).collect();
        if cache.dims != dims {
            return Err(Error::Contract("activation cache was produced by a different network".into()));
        }
        if cache.revision != self.revision {
            return Err(Error::Contract(
                "activation cache is stale: parameters changed since the forward pass".into(),
            ));
        }
        let rows = cache.inputs[0].rows();
        if grad_output.shape() != (rows, self.out_dim()) {
            return Err(Error::shape(
                "mlp_backward",
                format!("{rows}x{}", self.out_dim()),
                format!("{}x{}", grad_output.rows(), grad_output.cols()),
            ));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_output.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation != Activation::Identity {
                for (d, p) in delta.data_mut().iter_mut().zip(cache.pre[l].data()) {
                    *d *= layer.activation.derivative(*p);
                }
            }
            let gw = cache.inputs[l].t_matmul(&delta)?;
            let mut gb = vec![0.0; layer.out_dim()];
            for r in delta.row_iter() {
                for (b, d) in gb.iter_mut().zip(r) {
                    *b += d;
                }
            }
            grads.push(DenseGrads {
                weight: gw,
                bias: gb,
            });
            delta = delta.matmul_t(&layer.weight)?;
        }
        grads.reverse();
        Ok((delta, MlpGrads { layers: grads }))
    }
}

fn apply_inplace(m: &mut Matrix, act: Activation) {
    if act != Activation::Identity {
        m.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
    }
}
