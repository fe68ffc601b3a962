// SPDX-License-Identifier: MIT OR Apache-2.0

//! Labelled synthetic metrics for end-to-end checks.
//!
//! Every metric mixes a few shared periodic latent signals, so metrics are
//! coupled and partly multiplicative. Anomalous segments are injected into
//! the test half only; their positions are the ground-truth labels.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataio::MetricDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct SyntheticConfig {
    pub length: usize,
    pub metrics: usize,
    pub anomaly_segments: usize,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    /// Fraction of `length` used for training.
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            length: 5000,
            metrics: 5,
            anomaly_segments: 10,
            noise: 0.02,
            train_fraction: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnomalyKind {
    /// Several metrics jump to a new level.
    LevelShift,
    /// Short, tall spikes on a subset of metrics.
    Spikes,
    /// Affected metrics oscillate at an unseen frequency and amplitude.
    Oscillation,
    /// Affected metrics stop following the shared signals and run against
    /// them at larger amplitude.
    Decoupling,
}

const KINDS: [AnomalyKind; 4] = [
    AnomalyKind::LevelShift,
    AnomalyKind::Spikes,
    AnomalyKind::Oscillation,
    AnomalyKind::Decoupling,
];

/// Position of one injected anomaly, relative to the start of the test set.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    pub kind: AnomalyKind,
    pub metrics: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SyntheticData<T> {
    pub train: MetricDataset<T>,
    /// Carries labels.
    pub test: MetricDataset<T>,
    pub segments: Vec<Segment>,
}

struct Mixture {
    weights: Vec<[f64; 4]>,
    offsets: Vec<f64>,
}

impl Mixture {
    fn new(metrics: usize, rng: &mut ChaCha8Rng) -> Self {
        let weights = (0..metrics)
            .map(|_| {
                [
                    rng.random_range(0.4..1.0),
                    rng.random_range(-0.8..0.8),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(0.1..0.4),
                ]
            })
            .collect();
        let offsets = (0..metrics).map(|_| rng.random_range(-1.0..3.0)).collect();
        Self { weights, offsets }
    }

    fn latents(t: usize) -> [f64; 4] {
        let t = t as f64;
        let a = (TAU * t / 50.0).sin();
        let b = (TAU * t / 37.0 + 0.7).sin();
        [a, b, a * b, (TAU * t / 90.0).cos()]
    }

    fn value(&self, k: usize, latents: &[f64; 4]) -> f64 {
        self.offsets[k]
            + self.weights[k]
                .iter()
                .zip(latents)
                .map(|(w, l)| w * l)
                .sum::<f64>()
    }

    /// Peak-to-peak bound of metric `k` without noise.
    fn span(&self, k: usize) -> f64 {
        2.0 * self.weights[k].iter().map(|w| w.abs()).sum::<f64>()
    }
}

fn place_segments(
    cfg: &SyntheticConfig,
    test_len: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize)>> {
    let n = cfg.anomaly_segments;
    if n == 0 {
        return Ok(Vec::new());
    }
    // Evenly spaced slots with jitter; segments stay clear of slot borders so
    // consecutive anomalies never merge.
    let slot = test_len / n;
    let min_len = 20usize;
    let max_len = 50usize;
    let lead = 80usize;
    if slot < lead + max_len + 20 {
        return Err(Error::InvalidArgument(format!(
            "test length {test_len} too short for {n} anomaly segments"
        )));
    }
    Ok((0..n)
        .map(|i| {
            let len = rng.random_range(min_len..=max_len);
            let start = i * slot + rng.random_range(lead..slot - len - 10);
            (start, len)
        })
        .collect())
}

pub fn generate<T: Scalar>(cfg: &SyntheticConfig) -> Result<SyntheticData<T>> {
    if cfg.metrics == 0 || cfg.length < 4 {
        return Err(Error::InvalidArgument(
            "synthetic data needs metrics and length".into(),
        ));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(Error::InvalidArgument(
            "train_fraction must lie in (0, 1)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mix = Mixture::new(cfg.metrics, &mut rng);
    let noise = Normal::new(0.0, cfg.noise.max(0.0))
        .map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;

    let m = cfg.metrics;
    let mut values = Matrix::<f64>::zeros(cfg.length, m);
    for t in 0..cfg.length {
        let lat = Mixture::latents(t);
        for k in 0..m {
            values[(t, k)] = mix.value(k, &lat) + noise.sample(&mut rng);
        }
    }

    let split = ((cfg.length as f64) * cfg.train_fraction).round() as usize;
    let test_len = cfg.length - split;
    let mut labels = vec![false; test_len];
    let mut segments = Vec::new();
    for (i, (start, len)) in place_segments(cfg, test_len, &mut rng)?
        .into_iter()
        .enumerate()
    {
        let kind = KINDS[i % KINDS.len()];
        let affected = (m / 2).max(1);
        let mut chosen: Vec<usize> = (0..m).collect();
        for j in 0..affected {
            let pick = rng.random_range(j..m);
            chosen.swap(j, pick);
        }
        chosen.truncate(affected);
        chosen.sort_unstable();
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        for dt in 0..len {
            let t = split + start + dt;
            let lat = Mixture::latents(t);
            for &k in &chosen {
                let span = mix.span(k);
                let v = &mut values[(t, k)];
                match kind {
                    AnomalyKind::LevelShift => *v += sign * 1.5 * span,
                    AnomalyKind::Spikes => {
                        if dt % 6 < 2 {
                            *v += sign * 2.0 * span;
                        }
                    }
                    AnomalyKind::Oscillation => {
                        *v = mix.offsets[k] + 1.2 * span * (TAU * dt as f64 / 7.0).sin()
                    }
                    AnomalyKind::Decoupling => {
                        let normal = mix.value(k, &lat) - mix.offsets[k];
                        *v = mix.offsets[k] - 2.5 * normal + sign * span;
                    }
                }
            }
            labels[start + dt] = true;
        }
        segments.push(Segment {
            start,
            len,
            kind,
            metrics: chosen,
        });
    }

    let cast = |rows: std::ops::Range<usize>| {
        let data = rows
            .flat_map(|t| values.row(t).to_vec())
            .map(T::of)
            .collect::<Vec<T>>();
        data
    };
    let names: Vec<String> = (0..m).map(|k| format!("metric_{k}")).collect();
    let train = MetricDataset::new(
        "synthetic-train",
        Matrix::from_vec(split, m, cast(0..split))?,
        names.clone(),
        None,
    )?;
    let test = MetricDataset::new(
        "synthetic-test",
        Matrix::from_vec(test_len, m, cast(split..cfg.length))?,
        names,
        Some(labels),
    )?;
    Ok(SyntheticData {
        train,
        test,
        segments,
    })
}
