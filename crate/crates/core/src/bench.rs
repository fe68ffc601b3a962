// SPDX-License-Identifier: MIT OR Apache-2.0

//! Wall-clock efficiency measurements versus window size.
//!
//! Timed regions run on the calling thread only. Each measurement is the
//! median of `repeats` runs after one discarded warm-up, minus the median
//! cost of timing an empty closure.

use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::MetricDataset;
use crate::error::{Error, Result};
use crate::interactions::{
    temporal_interactions_fast, temporal_interactions_naive, CollabMachineParams, Kernel,
};
use crate::matrix::Matrix;
use crate::model::{loss_mse, run_epoch, ForecastModel, LossKind, TrainConfig};
use crate::preprocess::{apply_normalizer, fit_normalizer, make_windows};
use crate::scalar::Scalar;

/// Window sizes swept by default.
pub const DEFAULT_WINDOW_SIZES: [usize; 5] = [16, 32, 64, 128, 256];

pub const RESULTS_CSV_HEADER: &str =
    "window_size,phase,kernel,wall_seconds,windows_processed,repeats";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Predict,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Train => "train",
            Phase::Predict => "predict",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub window_size: usize,
    pub phase: Phase,
    pub kernel: Kernel,
    /// Median over repeats, calibration subtracted.
    pub wall_seconds: f64,
    pub windows_processed: usize,
    pub repeats: usize,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub window_sizes: Vec<usize>,
    pub tau_train: usize,
    pub tau_test: usize,
    pub repeats: usize,
    /// Batch size, hidden widths and seed are taken from here; the same
    /// values are used for every run.
    pub train: TrainConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            window_sizes: DEFAULT_WINDOW_SIZES.to_vec(),
            tau_train: 5,
            tau_test: 1,
            repeats: 3,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub results: Vec<BenchResult>,
    /// Median cost of timing an empty closure, already subtracted.
    pub calibration_seconds: f64,
    /// Mean loss of the timed training epoch for each (window size, kernel).
    pub epoch_losses: Vec<(usize, Kernel, f64)>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median wall time of `f` over `repeats` runs after one warm-up.
fn time_median<F: FnMut() -> Result<()>>(repeats: usize, mut f: F) -> Result<f64> {
    f()?;
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        f()?;
        samples.push(start.elapsed().as_secs_f64());
    }
    Ok(median(samples))
}

/// Harness overhead: timing a closure that does nothing.
pub fn calibrate(repeats: usize) -> f64 {
    time_median(repeats.max(3), || {
        black_box(());
        Ok(())
    })
    .unwrap_or(0.0)
}

fn corrected(raw: f64, calibration: f64) -> f64 {
    let t = raw - calibration;
    if t > 0.0 {
        t
    } else {
        raw.max(f64::MIN_POSITIVE)
    }
}

/// For every window size and both kernels: one training epoch (stride
/// `tau_train`) and scoring of every test window (stride `tau_test`).
/// Preprocessing is outside the timed region.
pub fn run_efficiency_suite<T: Scalar>(
    train: &MetricDataset<T>,
    test: &MetricDataset<T>,
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    if cfg.repeats < 3 {
        return Err(Error::InvalidArgument(
            "benchmarks need at least 3 repeats".into(),
        ));
    }
    cfg.train.validate()?;
    let largest = cfg.window_sizes.iter().copied().max().unwrap_or(0);
    for (d, what) in [(train, "training"), (test, "test")] {
        if d.len() < largest + 1 {
            return Err(Error::InsufficientData {
                needed: largest + 1,
                found: d.len(),
            })
            .map_err(|e| Error::InvalidArgument(format!("{what} data: {e}")));
        }
    }
    let normalizer = fit_normalizer(train);
    let train_n = apply_normalizer(&normalizer, train)?;
    let test_n = apply_normalizer(&normalizer, test)?;
    let calibration = calibrate(cfg.repeats);

    let mut results = Vec::new();
    let mut epoch_losses = Vec::new();
    for &omega in &cfg.window_sizes {
        let train_w = make_windows(&train_n, omega, cfg.tau_train)?;
        let test_w = make_windows(&test_n, omega, cfg.tau_test)?;
        let order: Vec<usize> = (0..train_w.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
        let initial =
            ForecastModel::<T>::init(cfg.train.model_config(omega, train.metrics()), &mut rng)?;

        for kernel in [Kernel::Fast, Kernel::Naive] {
            let start_model = initial.clone().with_kernel(kernel);
            let mut last_loss = f64::NAN;
            let train_time = time_median(cfg.repeats, || {
                let mut model = start_model.clone();
                let mut adam = cfg.train.optimizer(&model.params);
                last_loss = run_epoch(
                    &mut model,
                    &mut adam,
                    &train_w,
                    &order,
                    cfg.train.batch_size,
                    LossKind::Mse,
                    None,
                )?;
                black_box(&model);
                Ok(())
            })?;
            epoch_losses.push((omega, kernel, last_loss));
            results.push(BenchResult {
                window_size: omega,
                phase: Phase::Train,
                kernel,
                wall_seconds: corrected(train_time, calibration),
                windows_processed: train_w.len(),
                repeats: cfg.repeats,
            });

            let predict_time = time_median(cfg.repeats, || {
                for (x, target) in test_w.windows.iter().zip(&test_w.targets) {
                    let pred = start_model.forward(x)?;
                    black_box(loss_mse(&pred, target)?);
                }
                Ok(())
            })?;
            results.push(BenchResult {
                window_size: omega,
                phase: Phase::Predict,
                kernel,
                wall_seconds: corrected(predict_time, calibration),
                windows_processed: test_w.len(),
                repeats: cfg.repeats,
            });
        }
    }
    Ok(BenchReport {
        results,
        calibration_seconds: calibration,
        epoch_losses,
    })
}

/// Timing of the time-axis interaction kernel alone.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTiming {
    pub window_size: usize,
    pub kernel: Kernel,
    /// Median seconds for one pass over all windows.
    pub wall_seconds: f64,
    pub windows_processed: usize,
    pub repeats: usize,
}

/// Times both time-axis kernels over `windows` random windows per size with
/// `metrics` columns. Small windows are swept several times per sample so
/// every sample covers a comparable amount of work.
pub fn run_kernel_scaling(
    window_sizes: &[usize],
    metrics: usize,
    windows: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<KernelTiming>> {
    if repeats < 3 || windows == 0 || metrics == 0 {
        return Err(Error::InvalidArgument(
            "kernel scaling needs repeats >= 3 and non-empty windows".into(),
        ));
    }
    let calibration = calibrate(repeats);
    let largest = window_sizes.iter().copied().max().unwrap_or(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &omega in window_sizes {
        let data: Vec<Matrix<f64>> = (0..windows)
            .map(|_| {
                Matrix::from_vec(
                    omega,
                    metrics,
                    (0..omega * metrics)
                        .map(|_| rng.random_range(0.0..1.0))
                        .collect(),
                )
                .expect("sized buffer")
            })
            .collect();
        let params = CollabMachineParams::<f64>::init(omega, metrics, &mut rng);
        let passes = largest.div_ceil(omega).max(1) * 4;
        for kernel in [Kernel::Fast, Kernel::Naive] {
            let raw = time_median(repeats, || {
                for _ in 0..passes {
                    for x in &data {
                        let h = match kernel {
                            Kernel::Fast => temporal_interactions_fast(x, &params)?,
                            Kernel::Naive => temporal_interactions_naive(x, &params)?,
                        };
                        black_box(h);
                    }
                }
                Ok(())
            })?;
            out.push(KernelTiming {
                window_size: omega,
                kernel,
                wall_seconds: corrected(raw, calibration) / passes as f64,
                windows_processed: windows,
                repeats,
            });
        }
    }
    Ok(out)
}

/// Least-squares slope of `ln(seconds)` against `ln(window_size)`.
pub fn fit_scaling_exponent(points: &[(usize, f64)]) -> Result<f64> {
    if points.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 window sizes to fit a slope, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|&(w, t)| w == 0 || t.is_nan() || t <= 0.0)
    {
        return Err(Error::InvalidArgument(
            "window sizes and times must be positive".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|&(w, _)| (w as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, t)| t.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "window sizes must not all be equal".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// Slope for the rows of one (phase, kernel) combination.
pub fn scaling_exponent_for(results: &[BenchResult], phase: Phase, kernel: Kernel) -> Result<f64> {
    let points: Vec<(usize, f64)> = results
        .iter()
        .filter(|r| r.phase == phase && r.kernel == kernel)
        .map(|r| (r.window_size, r.wall_seconds))
        .collect();
    fit_scaling_exponent(&points)
}

/// Rows in the exact results-CSV column order.
pub fn results_csv(results: &[BenchResult]) -> String {
    let mut s = String::from(RESULTS_CSV_HEADER);
    s.push('\n');
    for r in results {
        s.push_str(&format!(
            "{},{},{},{:e},{},{}\n",
            r.window_size, r.phase, r.kernel, r.wall_seconds, r.windows_processed, r.repeats
        ));
    }
    s
}

/// Long format for plotting: one `(series, window_size, seconds)` row per
/// measurement, where series is `phase/kernel`.
pub fn results_long_csv(results: &[BenchResult], calibration: f64) -> String {
    let mut s = String::from("series,window_size,seconds\n");
    for r in results {
        s.push_str(&format!(
            "{}/{},{},{:e}\n",
            r.phase, r.kernel, r.window_size, r.wall_seconds
        ));
    }
    s.push_str(&format!("calibration,0,{calibration:e}\n"));
    s
}
