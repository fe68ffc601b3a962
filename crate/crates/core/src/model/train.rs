// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::MetricDataset;
use crate::error::{Error, Result};
use crate::interactions::Kernel;
use crate::preprocess::{
    apply_normalizer, fit_normalizer, make_windows, NormalizationParams, WindowSet,
};
use crate::scalar::Scalar;

use super::{AdamState, ForecastModel, LossKind, ModelConfig, Params, DEFAULT_HIDDEN};

/// Optimization and architecture settings for [`train`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once the epoch loss changes by less than this.
    pub loss_delta_stop: f64,
    pub seed: u64,
    pub ablate_cm: bool,
    pub hidden: Vec<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub loss: LossKind,
    pub pooled_interactions: bool,
    pub relu_output: bool,
    pub kernel: Kernel,
    /// Worker threads for per-window gradients. Results do not depend on it.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 200,
            loss_delta_stop: 1e-5,
            seed: 0,
            ablate_cm: false,
            hidden: DEFAULT_HIDDEN.to_vec(),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            loss: LossKind::Mse,
            pooled_interactions: false,
            relu_output: false,
            kernel: Kernel::Fast,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_owned()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if self.loss_delta_stop.is_nan() || self.loss_delta_stop <= 0.0 {
            return bad("loss_delta_stop must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        if self.threads == 0 {
            return bad("threads must be positive");
        }
        Ok(())
    }

    pub fn optimizer<T: Scalar>(&self, params: &Params<T>) -> AdamState<T> {
        AdamState::new(
            params,
            T::of(self.learning_rate),
            T::of(self.beta1),
            T::of(self.beta2),
            T::of(self.epsilon),
        )
    }

    pub fn model_config(&self, omega: usize, metrics: usize) -> ModelConfig {
        ModelConfig {
            omega,
            metrics,
            hidden: self.hidden.clone(),
            ablate_cm: self.ablate_cm,
            pooled_interactions: self.pooled_interactions,
            relu_output: self.relu_output,
            kernel: self.kernel,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub model: ForecastModel<T>,
    pub normalizer: NormalizationParams<T>,
    /// Mean per-window loss of each completed epoch.
    pub loss_history: Vec<f64>,
    /// True when the loss-change rule ended training before `max_epochs`.
    pub converged: bool,
}

/// Summed loss and summed gradients over `batch` (indices into `windows`).
///
/// Per-window gradients may be computed on several threads but are always
/// reduced in batch order, so the result is independent of the thread count.
pub fn batch_gradients<T: Scalar>(
    model: &ForecastModel<T>,
    windows: &WindowSet<T>,
    batch: &[usize],
    kind: LossKind,
    pool: Option<&rayon::ThreadPool>,
) -> Result<(T, Params<T>)> {
    let one = |&i: &usize| model.backward(&windows.windows[i], &windows.targets[i], kind);
    let per_window: Vec<Result<(T, Params<T>)>> = match pool {
        Some(pool) => pool.install(|| batch.par_iter().map(one).collect()),
        None => batch.iter().map(one).collect(),
    };
    let mut total_loss = T::zero();
    let mut total = model.params.zeros_like();
    for item in per_window {
        let (l, g) = item?;
        total_loss += l;
        total.add_assign(&g);
    }
    Ok((total_loss, total))
}

/// One pass over `windows` in the given order, one Adam step per batch.
/// Returns the mean per-window loss seen during the pass.
///
/// Divergence is reported with `epoch = 0`; [`train`] fills in the epoch.
pub fn run_epoch<T: Scalar>(
    model: &mut ForecastModel<T>,
    adam: &mut AdamState<T>,
    windows: &WindowSet<T>,
    order: &[usize],
    batch_size: usize,
    kind: LossKind,
    pool: Option<&rayon::ThreadPool>,
) -> Result<f64> {
    let mut total = T::zero();
    for batch in order.chunks(batch_size) {
        let (batch_loss, mut grads) = batch_gradients(model, windows, batch, kind, pool)?;
        if !batch_loss.is_finite() {
            return Err(Error::Diverged {
                epoch: 0,
                message: "non-finite batch loss".into(),
            });
        }
        grads.scale(T::one() / T::of(batch.len() as f64));
        adam.step(&mut model.params, &grads)?;
        total += batch_loss;
    }
    let mean = (total / T::of(order.len() as f64)).as_f64();
    if !mean.is_finite() {
        return Err(Error::Diverged {
            epoch: 0,
            message: "non-finite epoch loss".into(),
        });
    }
    if let Some(param) = model.params.first_non_finite() {
        return Err(Error::Diverged {
            epoch: 0,
            message: format!("parameter {param} became non-finite"),
        });
    }
    Ok(mean)
}

/// Fits the normalizer on `train`, windows it with stride `tau_train` and runs
/// mini-batch Adam until the epoch loss settles or `max_epochs` is reached.
pub fn train<T: Scalar>(
    train: &MetricDataset<T>,
    cfg: &TrainConfig,
    omega: usize,
    tau_train: usize,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let normalizer = fit_normalizer(train);
    let normalized = apply_normalizer(&normalizer, train)?;
    let windows = make_windows(&normalized, omega, tau_train)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = ForecastModel::init(cfg.model_config(omega, train.metrics()), &mut rng)?;
    let mut adam = cfg.optimizer(&model.params);
    let pool = if cfg.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let epoch_loss = run_epoch(
            &mut model,
            &mut adam,
            &windows,
            &order,
            cfg.batch_size,
            cfg.loss,
            pool.as_ref(),
        )
        .map_err(|e| match e {
            Error::Diverged { message, .. } => Error::Diverged { epoch, message },
            other => other,
        })?;
        let previous = history.last().copied();
        history.push(epoch_loss);
        if previous.is_some_and(|p| (epoch_loss - p).abs() < cfg.loss_delta_stop) {
            converged = true;
            break;
        }
    }

    Ok(TrainOutcome {
        model,
        normalizer,
        loss_history: history,
        converged,
    })
}
