// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-metric max-min normalization and sliding windows.

use serde::{Deserialize, Serialize};

use crate::dataio::MetricDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Default stride between training windows.
pub const DEFAULT_TAU_TRAIN: usize = 5;
/// Default stride between test windows; every test timestamp after the first
/// window gets a score.
pub const DEFAULT_TAU_TEST: usize = 1;

/// Column extrema fitted on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams<T> {
    pub mins: Vec<T>,
    pub maxs: Vec<T>,
}

impl<T: Scalar> NormalizationParams<T> {
    pub fn metrics(&self) -> usize {
        self.mins.len()
    }

    /// Maps one value of column `k`. Constant columns map to zero. Values
    /// outside the training range are not clipped.
    #[inline]
    pub fn normalize(&self, k: usize, x: T) -> T {
        let range = self.maxs[k] - self.mins[k];
        if range > T::zero() {
            (x - self.mins[k]) / range
        } else {
            T::zero()
        }
    }
}

pub fn fit_normalizer<T: Scalar>(train: &MetricDataset<T>) -> NormalizationParams<T> {
    let values = train.values();
    let mut mins = values.row(0).to_vec();
    let mut maxs = mins.clone();
    for r in 1..values.rows() {
        for (k, &x) in values.row(r).iter().enumerate() {
            mins[k] = mins[k].min(x);
            maxs[k] = maxs[k].max(x);
        }
    }
    NormalizationParams { mins, maxs }
}

pub fn apply_normalizer<T: Scalar>(
    p: &NormalizationParams<T>,
    d: &MetricDataset<T>,
) -> Result<MetricDataset<T>> {
    if d.metrics() != p.metrics() {
        return Err(Error::DimensionMismatch {
            what: "normalizer metric count",
            expected: p.metrics(),
            found: d.metrics(),
        });
    }
    let src = d.values();
    let mut out = Matrix::zeros(src.rows(), src.cols());
    for r in 0..src.rows() {
        for (k, (o, &x)) in out.row_mut(r).iter_mut().zip(src.row(r)).enumerate() {
            *o = p.normalize(k, x);
        }
    }
    Ok(d.with_values(out))
}

/// Ordered `(window, target)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSet<T> {
    pub windows: Vec<Matrix<T>>,
    pub targets: Vec<Vec<T>>,
    pub omega: usize,
    pub tau: usize,
}

impl<T> WindowSet<T> {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Source row index of the target of window `s`.
    pub fn target_index(&self, s: usize) -> usize {
        s * self.tau + self.omega
    }
}

/// Number of windows with a target: `floor((T - omega - 1) / tau) + 1`, or 0
/// when `T < omega + 1`.
pub fn window_count(len: usize, omega: usize, tau: usize) -> usize {
    if len < omega + 1 {
        0
    } else {
        (len - omega - 1) / tau + 1
    }
}

/// Window `s` copies source rows `s*tau ..= s*tau + omega - 1`; its target is
/// row `s*tau + omega`.
pub fn make_windows<T: Scalar>(
    d: &MetricDataset<T>,
    omega: usize,
    tau: usize,
) -> Result<WindowSet<T>> {
    if omega == 0 || tau == 0 {
        return Err(Error::InvalidArgument(format!(
            "window size and stride must be positive (omega={omega}, tau={tau})"
        )));
    }
    let count = window_count(d.len(), omega, tau);
    if count == 0 {
        return Err(Error::InsufficientData {
            needed: omega + 1,
            found: d.len(),
        });
    }
    let values = d.values();
    let mut windows = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    for s in 0..count {
        let start = s * tau;
        windows.push(values.slice_rows(start, omega));
        targets.push(values.row(start + omega).to_vec());
    }
    Ok(WindowSet {
        windows,
        targets,
        omega,
        tau,
    })
}
