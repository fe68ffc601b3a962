// SPDX-License-Identifier: MIT OR Apache-2.0

//! Forecasting model: interaction layer feeding an MLP that predicts the
//! observation following each window.

mod adam;
mod mlp;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interactions::{
    interaction_backward_with, interaction_forward_with, CollabMachineParams, Kernel,
};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub use adam::AdamState;
pub use mlp::{mlp_backward, mlp_forward, DenseLayer, MlpCache, MlpParams};
pub use train::{batch_gradients, run_epoch, train, TrainConfig, TrainOutcome};

/// Default hidden widths between the input and the `m`-wide output.
pub const DEFAULT_HIDDEN: [usize; 2] = [128, 64];

/// Per-window training objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `(1/m) sum_k (pred_k - target_k)^2`.
    #[default]
    Mse,
    /// Unsquared Euclidean norm `||pred - target||_2`.
    L2,
}

/// Mean squared error over the `m` coordinates.
pub fn loss_mse<T: Scalar>(pred: &[T], target: &[T]) -> Result<T> {
    loss(LossKind::Mse, pred, target)
}

pub fn loss<T: Scalar>(kind: LossKind, pred: &[T], target: &[T]) -> Result<T> {
    Ok(loss_with_grad(kind, pred, target)?.0)
}

/// Loss value and its gradient with respect to `pred`.
pub fn loss_with_grad<T: Scalar>(kind: LossKind, pred: &[T], target: &[T]) -> Result<(T, Vec<T>)> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            what: "prediction length",
            expected: target.len(),
            found: pred.len(),
        });
    }
    let diff: Vec<T> = pred.iter().zip(target).map(|(&p, &t)| p - t).collect();
    let sq: T = diff.iter().map(|&d| d * d).sum();
    match kind {
        LossKind::Mse => {
            let m = T::of(diff.len() as f64);
            let two_over_m = T::of(2.0) / m;
            Ok((sq / m, diff.iter().map(|&d| two_over_m * d).collect()))
        }
        LossKind::L2 => {
            let norm = sq.sqrt();
            let grad = if norm > T::zero() {
                diff.iter().map(|&d| d / norm).collect()
            } else {
                vec![T::zero(); diff.len()]
            };
            Ok((norm, grad))
        }
    }
}

/// Architecture and input-construction switches. Stored in model files
/// except `kernel`, which only selects an evaluation route.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub omega: usize,
    pub metrics: usize,
    /// Widths strictly between the input and output layers.
    pub hidden: Vec<usize>,
    /// Feed the MLP per-metric window means instead of interaction vectors.
    pub ablate_cm: bool,
    /// Sum `h_f` and `h_t` down to one scalar each.
    pub pooled_interactions: bool,
    /// Apply ReLU to the output layer as well.
    pub relu_output: bool,
    #[serde(skip, default = "default_kernel")]
    pub kernel: Kernel,
}

fn default_kernel() -> Kernel {
    Kernel::Fast
}

impl ModelConfig {
    pub fn new(omega: usize, metrics: usize) -> Self {
        Self {
            omega,
            metrics,
            hidden: DEFAULT_HIDDEN.to_vec(),
            ablate_cm: false,
            pooled_interactions: false,
            relu_output: false,
            kernel: Kernel::Fast,
        }
    }

    /// `d0`: `m` when ablated, 2 when pooled, `omega + m` otherwise.
    pub fn input_width(&self) -> usize {
        if self.ablate_cm {
            self.metrics
        } else if self.pooled_interactions {
            2
        } else {
            self.omega + self.metrics
        }
    }

    /// `[d0, hidden..., m]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_width()];
        w.extend_from_slice(&self.hidden);
        w.push(self.metrics);
        w
    }

    fn validate(&self) -> Result<()> {
        if self.omega == 0 || self.metrics == 0 {
            return Err(Error::InvalidArgument(format!(
                "window size and metric count must be positive (omega={}, m={})",
                self.omega, self.metrics
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidArgument(
                "hidden widths must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// All trainable parameters; also the shape of gradients and Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub cm: CollabMachineParams<T>,
    pub mlp: MlpParams<T>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros_like(&self) -> Self {
        Self {
            cm: CollabMachineParams::zeros(self.cm.omega(), self.cm.metrics()),
            mlp: MlpParams::zeros(&self.mlp.widths()),
        }
    }

    pub fn param_count(&self) -> usize {
        self.cm.param_count() + self.mlp.param_count()
    }

    /// Named parameter arrays in storage order: interaction parameters
    /// first, then each layer's weights (row-major) and bias.
    pub fn blocks(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = self
            .cm
            .blocks()
            .into_iter()
            .map(|(n, s)| (n.to_owned(), s))
            .collect();
        for (l, layer) in self.mlp.layers.iter().enumerate() {
            out.push((format!("mlp.layer{l}.weight"), layer.weights.as_slice()));
            out.push((format!("mlp.layer{l}.bias"), &layer.bias));
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out: Vec<(String, &mut [T])> = self
            .cm
            .blocks_mut()
            .into_iter()
            .map(|(n, s)| (n.to_owned(), s))
            .collect();
        for (l, layer) in self.mlp.layers.iter_mut().enumerate() {
            out.push((format!("mlp.layer{l}.weight"), layer.weights.as_mut_slice()));
            out.push((format!("mlp.layer{l}.bias"), &mut layer.bias));
        }
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        for ((_, a), (_, b)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for (_, a) in self.blocks_mut() {
            for x in a.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn first_non_finite(&self) -> Option<String> {
        self.blocks().into_iter().find_map(|(name, s)| {
            s.iter()
                .position(|v| !v.is_finite())
                .map(|i| format!("{name}[{i}]"))
        })
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        let a = self.blocks();
        let b = other.blocks();
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                what: "parameter block count",
                expected: a.len(),
                found: b.len(),
            });
        }
        for ((_, x), (_, y)) in a.iter().zip(&b) {
            if x.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    what: "parameter block length",
                    expected: x.len(),
                    found: y.len(),
                });
            }
        }
        Ok(())
    }
}

/// Interaction parameters, MLP and architecture switches.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastModel<T> {
    pub config: ModelConfig,
    pub params: Params<T>,
}

/// Intermediate values kept by [`ForecastModel::forward_cached`].
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    pub mlp_input: Vec<T>,
    pub mlp: MlpCache<T>,
}

impl<T: Scalar> ForecastModel<T> {
    /// Draws interaction parameters first, then MLP weights layer by layer.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let cm = CollabMachineParams::init(config.omega, config.metrics, rng);
        let mlp = MlpParams::init(&config.widths(), rng);
        Ok(Self {
            config,
            params: Params { cm, mlp },
        })
    }

    /// Assembles a model from parts, checking every shape invariant.
    pub fn from_parts(config: ModelConfig, params: Params<T>) -> Result<Self> {
        config.validate()?;
        let expected = Params {
            cm: CollabMachineParams::zeros(config.omega, config.metrics),
            mlp: MlpParams::zeros(&config.widths()),
        };
        expected.check_same_shape(&params)?;
        if params.mlp.widths() != config.widths() {
            return Err(Error::InvalidArgument(format!(
                "layer widths {:?} do not match configuration {:?}",
                params.mlp.widths(),
                config.widths()
            )));
        }
        Ok(Self { config, params })
    }

    pub fn omega(&self) -> usize {
        self.config.omega
    }

    pub fn metrics(&self) -> usize {
        self.config.metrics
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.config.kernel = kernel;
        self
    }

    fn check_window(&self, x: &Matrix<T>) -> Result<()> {
        if x.shape() != (self.omega(), self.metrics()) {
            return Err(Error::DimensionMismatch {
                what: if x.rows() != self.omega() {
                    "window rows"
                } else {
                    "window metrics"
                },
                expected: if x.rows() != self.omega() {
                    self.omega()
                } else {
                    self.metrics()
                },
                found: if x.rows() != self.omega() {
                    x.rows()
                } else {
                    x.cols()
                },
            });
        }
        Ok(())
    }

    fn mlp_input(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        if self.config.ablate_cm {
            let scale = T::one() / T::of(x.rows() as f64);
            let mut mean = vec![T::zero(); x.cols()];
            for r in 0..x.rows() {
                for (acc, &v) in mean.iter_mut().zip(x.row(r)) {
                    *acc += v;
                }
            }
            return Ok(mean.into_iter().map(|s| s * scale).collect());
        }
        let out = interaction_forward_with(x, &self.params.cm, self.config.kernel)?;
        if self.config.pooled_interactions {
            Ok(vec![
                out.h_f.iter().copied().sum(),
                out.h_t.iter().copied().sum(),
            ])
        } else {
            Ok(out.concat)
        }
    }

    /// Predicts the observation following window `x`.
    pub fn forward(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Matrix<T>) -> Result<(Vec<T>, ForwardCache<T>)> {
        self.check_window(x)?;
        let input = self.mlp_input(x)?;
        let (pred, mlp) = mlp_forward(&self.params.mlp, &input, self.config.relu_output)?;
        Ok((
            pred,
            ForwardCache {
                mlp_input: input,
                mlp,
            },
        ))
    }

    /// Gradients of all parameters given `d loss / d prediction`.
    pub fn backward_from_output(
        &self,
        x: &Matrix<T>,
        cache: &ForwardCache<T>,
        out_grad: &[T],
    ) -> Result<Params<T>> {
        if out_grad.len() != self.metrics() {
            return Err(Error::DimensionMismatch {
                what: "output gradient",
                expected: self.metrics(),
                found: out_grad.len(),
            });
        }
        let (mlp_grads, input_grad) = mlp_backward(
            &self.params.mlp,
            &cache.mlp,
            out_grad,
            self.config.relu_output,
        );
        let cm_grads = if self.config.ablate_cm {
            CollabMachineParams::zeros(self.omega(), self.metrics())
        } else {
            let upstream = if self.config.pooled_interactions {
                let mut up = vec![input_grad[0]; self.omega()];
                up.extend(std::iter::repeat_n(input_grad[1], self.metrics()));
                up
            } else {
                input_grad
            };
            interaction_backward_with(x, &self.params.cm, &upstream, self.config.kernel)?.params
        };
        Ok(Params {
            cm: cm_grads,
            mlp: mlp_grads,
        })
    }

    /// Per-window loss and the gradient of that loss for every parameter.
    pub fn backward(&self, x: &Matrix<T>, target: &[T], kind: LossKind) -> Result<(T, Params<T>)> {
        let (pred, cache) = self.forward_cached(x)?;
        let (value, out_grad) = loss_with_grad(kind, &pred, target)?;
        Ok((value, self.backward_from_output(x, &cache, &out_grad)?))
    }

    /// Hidden-unit on/off pattern for window `x`; finite-difference checks
    /// use it to detect steps that cross a ReLU kink.
    pub fn activation_pattern(&self, x: &Matrix<T>) -> Result<Vec<bool>> {
        Ok(self.forward_cached(x)?.1.mlp.activation_pattern())
    }
}
