// SPDX-License-Identifier: MIT OR Apache-2.0

//! Unsupervised anomaly detection over multivariate monitoring metrics.
//!
//! A window of observations passes through a pairwise interaction layer
//! (cross-metric and cross-time, evaluated in linear time) into a small MLP
//! that forecasts the next observation. The sigmoid of the forecast's mean
//! squared error is the anomaly score.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which the rest of the tooling uses.
//!
//! ```no_run
//! use crossmetric::detector::{align_labels, score_series, sweep_threshold};
//! use crossmetric::model::train;
//! use crossmetric::synthetic::{generate, SyntheticConfig};
//! use crossmetric::TrainConfig;
//!
//! # fn main() -> crossmetric::Result<()> {
//! let data = generate::<f64>(&SyntheticConfig::default())?;
//! let out = train(&data.train, &TrainConfig::default(), 32, 5)?;
//! let scores = score_series(&out.model, &data.test, &out.normalizer)?;
//! let labels = align_labels(&scores, data.test.labels().unwrap())?;
//! let sweep = sweep_threshold(&scores, &labels, 0.1, true)?;
//! println!("best F1 {:.3} at {:?}", sweep.best.f1, sweep.best.threshold);
//! # Ok(())
//! # }
//! ```

pub mod bench;
pub mod dataio;
pub mod detector;
pub mod error;
pub mod interactions;
pub mod matrix;
pub mod model;
pub mod preprocess;
pub mod scalar;
pub mod synthetic;

pub use error::{Error, Result};
pub use interactions::{CollabMachineParams, InteractionOutput, Kernel};
pub use matrix::Matrix;
pub use model::{ForecastModel, LossKind, ModelConfig, TrainConfig};
pub use scalar::Scalar;

pub type Real = f64;

pub type MetricDataset = dataio::MetricDataset<Real>;
pub type DatasetSplit = dataio::DatasetSplit<Real>;
pub type ModelBundle = dataio::ModelBundle<Real>;
pub type NormalizationParams = preprocess::NormalizationParams<Real>;
pub type WindowSet = preprocess::WindowSet<Real>;
pub type Model = model::ForecastModel<Real>;
pub type Params = model::Params<Real>;
pub type ScoreSeries = detector::ScoreSeries<Real>;

pub type MetricDataset32 = dataio::MetricDataset<f32>;
pub type Model32 = model::ForecastModel<f32>;
