// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use rand::Rng;

/// Affine layer `y = x W + b`; `weights` is `fan_in x fan_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Matrix::zeros(fan_in, fan_out),
            bias: vec![T::zero(); fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    fn affine(&self, input: &[T]) -> Vec<T> {
        let mut out = self.bias.clone();
        for (i, &x) in input.iter().enumerate() {
            if x == T::zero() {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.weights.row(i)) {
                *o += x * w;
            }
        }
        out
    }
}

/// Stack of dense layers; ReLU between layers.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MlpParams<T> {
    pub layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> MlpParams<T> {
    pub fn zeros(widths: &[usize]) -> Self {
        Self {
            layers: widths
                .windows(2)
                .map(|w| DenseLayer::zeros(w[0], w[1]))
                .collect(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| T::of(rng.random_range(-bound..=bound)))
                    .collect();
                DenseLayer {
                    weights: Matrix::from_vec(fan_in, fan_out, data).expect("sized buffer"),
                    bias: vec![T::zero(); fan_out],
                }
            })
            .collect();
        Self { layers }
    }

    /// `[d0, d1, ..., dL]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self
            .layers
            .first()
            .map(|l| vec![l.fan_in()])
            .unwrap_or_default();
        w.extend(self.layers.iter().map(DenseLayer::fan_out));
        w
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, DenseLayer::fan_in)
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.fan_in() * l.fan_out() + l.fan_out())
            .sum()
    }
}

/// Per-layer inputs and pre-activations recorded by the forward pass.
#[derive(Clone, Debug)]
pub struct MlpCache<T> {
    pub inputs: Vec<Vec<T>>,
    pub pre_activations: Vec<Vec<T>>,
}

impl<T: Scalar> MlpCache<T> {
    /// Which hidden units were active, layer by layer.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.pre_activations
            .iter()
            .flat_map(|z| z.iter().map(|&v| v > T::zero()))
            .collect()
    }
}

#[inline]
fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Hidden layers use ReLU; the last layer is affine unless `relu_output`.
pub fn mlp_forward<T: Scalar>(
    p: &MlpParams<T>,
    input: &[T],
    relu_output: bool,
) -> Result<(Vec<T>, MlpCache<T>)> {
    if input.len() != p.input_width() {
        return Err(Error::DimensionMismatch {
            what: "mlp input width",
            expected: p.input_width(),
            found: input.len(),
        });
    }
    let n = p.layers.len();
    let mut cache = MlpCache {
        inputs: Vec::with_capacity(n),
        pre_activations: Vec::with_capacity(n),
    };
    let mut h = input.to_vec();
    for (l, layer) in p.layers.iter().enumerate() {
        let z = layer.affine(&h);
        let activate = l + 1 < n || relu_output;
        let next = if activate {
            z.iter().map(|&v| relu(v)).collect()
        } else {
            z.clone()
        };
        cache.inputs.push(h);
        cache.pre_activations.push(z);
        h = next;
    }
    Ok((h, cache))
}

/// Backpropagates `out_grad`; returns parameter gradients and the gradient
/// with respect to the input.
pub fn mlp_backward<T: Scalar>(
    p: &MlpParams<T>,
    cache: &MlpCache<T>,
    out_grad: &[T],
    relu_output: bool,
) -> (MlpParams<T>, Vec<T>) {
    let n = p.layers.len();
    let mut grads = MlpParams::zeros(&p.widths());
    let mut delta = out_grad.to_vec();
    for l in (0..n).rev() {
        if l + 1 < n || relu_output {
            for (d, &z) in delta.iter_mut().zip(&cache.pre_activations[l]) {
                if z <= T::zero() {
                    *d = T::zero();
                }
            }
        }
        let layer = &p.layers[l];
        let g = &mut grads.layers[l];
        let input = &cache.inputs[l];
        for (i, &x) in input.iter().enumerate() {
            if x == T::zero() {
                continue;
            }
            for (gw, &d) in g.weights.row_mut(i).iter_mut().zip(&delta) {
                *gw += x * d;
            }
        }
        for (gb, &d) in g.bias.iter_mut().zip(&delta) {
            *gb += d;
        }
        delta = (0..layer.fan_in())
            .map(|i| {
                layer
                    .weights
                    .row(i)
                    .iter()
                    .zip(&delta)
                    .map(|(&w, &d)| w * d)
                    .sum()
            })
            .collect();
    }
    (grads, delta)
}
