// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pairwise interaction layer over a window.
//!
//! For a window `X` (`omega` rows by `m` metrics) the layer produces two
//! vectors:
//!
//! * `h_f` (length `omega`): per timestamp `r`,
//!   `b0 + sum_i w_i X[r,i] + sum_{i<j} X[r,i] X[r,j] v_i v_j`
//! * `h_t` (length `m`): per metric `k`,
//!   `b0' + sum_t w'_t X[t,k] + sum_{s<t} X[s,k] X[t,k] v'_s v'_t`
//!
//! Each pair sum is computed either by the explicit double loop (quadratic in
//! the interacting axis) or through the factorization-machine identity
//!
//! ```text
//! sum_{i<j} a_i a_j = ((sum_i a_i)^2 - sum_i a_i^2) / 2,   a_i = x_i v_i
//! ```
//!
//! which visits each element once.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Which evaluation route the pair sums use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// Linear-time reformulation.
    Fast,
    /// Explicit double loop over pairs.
    Naive,
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kernel::Fast => "fast",
            Kernel::Naive => "naive",
        })
    }
}

/// Trainable parameters of the feature-axis and time-axis interaction terms.
///
/// The same struct carries gradients during backpropagation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollabMachineParams<T> {
    pub feat_bias: T,
    /// One weight per metric.
    pub feat_w: Vec<T>,
    pub feat_v: Vec<T>,
    pub time_bias: T,
    /// One weight per window position.
    pub time_w: Vec<T>,
    pub time_v: Vec<T>,
}

impl<T: Scalar> CollabMachineParams<T> {
    pub fn zeros(omega: usize, m: usize) -> Self {
        Self {
            feat_bias: T::zero(),
            feat_w: vec![T::zero(); m],
            feat_v: vec![T::zero(); m],
            time_bias: T::zero(),
            time_w: vec![T::zero(); omega],
            time_v: vec![T::zero(); omega],
        }
    }

    /// Biases start at zero; metric weights are uniform on `±1/sqrt(m)` and
    /// time weights on `±1/sqrt(omega)`.
    pub fn init<R: Rng + ?Sized>(omega: usize, m: usize, rng: &mut R) -> Self {
        let mut draw = |n: usize| {
            let bound = 1.0 / (n as f64).sqrt();
            (0..n)
                .map(|_| T::of(rng.random_range(-bound..=bound)))
                .collect::<Vec<T>>()
        };
        let feat_w = draw(m);
        let feat_v = draw(m);
        let time_w = draw(omega);
        let time_v = draw(omega);
        Self {
            feat_bias: T::zero(),
            feat_w,
            feat_v,
            time_bias: T::zero(),
            time_w,
            time_v,
        }
    }

    pub fn omega(&self) -> usize {
        self.time_w.len()
    }

    pub fn metrics(&self) -> usize {
        self.feat_w.len()
    }

    /// Parameters for the transposed window: feature and time roles swap.
    pub fn swapped(&self) -> Self {
        Self {
            feat_bias: self.time_bias,
            feat_w: self.time_w.clone(),
            feat_v: self.time_v.clone(),
            time_bias: self.feat_bias,
            time_w: self.feat_w.clone(),
            time_v: self.feat_v.clone(),
        }
    }

    pub fn param_count(&self) -> usize {
        2 + 2 * self.metrics() + 2 * self.omega()
    }

    /// Named parameter blocks in storage order.
    pub fn blocks(&self) -> [(&'static str, &[T]); 6] {
        [
            ("cm.feat_bias", std::slice::from_ref(&self.feat_bias)),
            ("cm.feat_w", &self.feat_w),
            ("cm.feat_v", &self.feat_v),
            ("cm.time_bias", std::slice::from_ref(&self.time_bias)),
            ("cm.time_w", &self.time_w),
            ("cm.time_v", &self.time_v),
        ]
    }

    pub fn blocks_mut(&mut self) -> [(&'static str, &mut [T]); 6] {
        [
            ("cm.feat_bias", std::slice::from_mut(&mut self.feat_bias)),
            ("cm.feat_w", &mut self.feat_w),
            ("cm.feat_v", &mut self.feat_v),
            ("cm.time_bias", std::slice::from_mut(&mut self.time_bias)),
            ("cm.time_w", &mut self.time_w),
            ("cm.time_v", &mut self.time_v),
        ]
    }

    fn check_window(&self, x: &Matrix<T>) -> Result<()> {
        if self.feat_v.len() != self.metrics() || self.time_v.len() != self.omega() {
            return Err(Error::DimensionMismatch {
                what: "interaction parameter lengths",
                expected: self.metrics(),
                found: self.feat_v.len(),
            });
        }
        if x.rows() != self.omega() {
            return Err(Error::DimensionMismatch {
                what: "window rows",
                expected: self.omega(),
                found: x.rows(),
            });
        }
        if x.cols() != self.metrics() {
            return Err(Error::DimensionMismatch {
                what: "window metrics",
                expected: self.metrics(),
                found: x.cols(),
            });
        }
        Ok(())
    }
}

/// Output of the interaction layer for one window.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionOutput<T> {
    pub h_f: Vec<T>,
    pub h_t: Vec<T>,
    /// `h_f` followed by `h_t`.
    pub concat: Vec<T>,
}

/// Arithmetic-operation tally used to check cost growth.
pub trait OpCounter {
    fn add(&mut self, ops: u64);
}

/// No-op tally; compiles away.
pub struct NoCount;

impl OpCounter for NoCount {
    #[inline(always)]
    fn add(&mut self, _: u64) {}
}

impl OpCounter for u64 {
    #[inline]
    fn add(&mut self, ops: u64) {
        *self += ops;
    }
}

fn feature_naive_impl<T: Scalar, C: OpCounter>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
    ops: &mut C,
) -> Vec<T> {
    let m = x.cols();
    (0..x.rows())
        .map(|r| {
            let row = x.row(r);
            let mut out = p.feat_bias;
            for (w, v) in p.feat_w.iter().zip(row) {
                out += *w * *v;
            }
            ops.add(2 * m as u64);
            for i in 0..m {
                for j in (i + 1)..m {
                    out += row[i] * row[j] * p.feat_v[i] * p.feat_v[j];
                }
            }
            ops.add(4 * (m * m.saturating_sub(1) / 2) as u64);
            out
        })
        .collect()
}

fn feature_fast_impl<T: Scalar, C: OpCounter>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
    ops: &mut C,
) -> Vec<T> {
    (0..x.rows())
        .map(|r| {
            let mut lin = T::zero();
            let mut sum = T::zero();
            let mut sum_sq = T::zero();
            for ((&xi, &wi), &vi) in x.row(r).iter().zip(&p.feat_w).zip(&p.feat_v) {
                let a = xi * vi;
                lin += wi * xi;
                sum += a;
                sum_sq += a * a;
            }
            ops.add(7 * x.cols() as u64 + 5);
            p.feat_bias + lin + T::half() * (sum * sum - sum_sq)
        })
        .collect()
}

fn temporal_naive_impl<T: Scalar, C: OpCounter>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
    ops: &mut C,
) -> Vec<T> {
    let (omega, m) = x.shape();
    let mut out = vec![p.time_bias; m];
    for t in 0..omega {
        let w = p.time_w[t];
        for (o, &v) in out.iter_mut().zip(x.row(t)) {
            *o += w * v;
        }
    }
    ops.add(2 * (omega * m) as u64);
    for s in 0..omega {
        let row_s = x.row(s);
        for t in (s + 1)..omega {
            let weight = p.time_v[s] * p.time_v[t];
            for (o, (&a, &b)) in out.iter_mut().zip(row_s.iter().zip(x.row(t))) {
                *o += a * b * weight;
            }
            ops.add(1 + 3 * m as u64);
        }
    }
    out
}

fn temporal_fast_impl<T: Scalar, C: OpCounter>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
    ops: &mut C,
) -> Vec<T> {
    let (omega, m) = x.shape();
    let mut lin = vec![T::zero(); m];
    let mut sum = vec![T::zero(); m];
    let mut sum_sq = vec![T::zero(); m];
    for t in 0..omega {
        let (w, v) = (p.time_w[t], p.time_v[t]);
        for (k, &xv) in x.row(t).iter().enumerate() {
            let a = xv * v;
            lin[k] += w * xv;
            sum[k] += a;
            sum_sq[k] += a * a;
        }
    }
    ops.add(7 * (omega * m) as u64 + 5 * m as u64);
    (0..m)
        .map(|k| p.time_bias + lin[k] + T::half() * (sum[k] * sum[k] - sum_sq[k]))
        .collect()
}

/// Feature-axis interactions by explicit pair enumeration; `O(omega m^2)`.
pub fn feature_interactions_naive<T: Scalar>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
) -> Result<Vec<T>> {
    p.check_window(x)?;
    Ok(feature_naive_impl(x, p, &mut NoCount))
}

/// Feature-axis interactions in one pass per timestamp; `O(omega m)`.
pub fn feature_interactions_fast<T: Scalar>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
) -> Result<Vec<T>> {
    p.check_window(x)?;
    Ok(feature_fast_impl(x, p, &mut NoCount))
}

/// Time-axis interactions by explicit pair enumeration; `O(omega^2 m)`.
pub fn temporal_interactions_naive<T: Scalar>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
) -> Result<Vec<T>> {
    p.check_window(x)?;
    Ok(temporal_naive_impl(x, p, &mut NoCount))
}

/// Time-axis interactions in one pass over the window; `O(omega m)`.
pub fn temporal_interactions_fast<T: Scalar>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
) -> Result<Vec<T>> {
    p.check_window(x)?;
    Ok(temporal_fast_impl(x, p, &mut NoCount))
}

/// Same as the uncounted functions, also returning the arithmetic-op tally.
pub fn counted_interactions<T: Scalar>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
    kernel: Kernel,
) -> Result<(InteractionOutput<T>, u64)> {
    p.check_window(x)?;
    let mut ops = 0u64;
    let (h_f, h_t) = match kernel {
        Kernel::Fast => (
            feature_fast_impl(x, p, &mut ops),
            temporal_fast_impl(x, p, &mut ops),
        ),
        Kernel::Naive => (
            feature_naive_impl(x, p, &mut ops),
            temporal_naive_impl(x, p, &mut ops),
        ),
    };
    Ok((concat(h_f, h_t), ops))
}

fn concat<T: Scalar>(h_f: Vec<T>, h_t: Vec<T>) -> InteractionOutput<T> {
    let mut joined = Vec::with_capacity(h_f.len() + h_t.len());
    joined.extend_from_slice(&h_f);
    joined.extend_from_slice(&h_t);
    InteractionOutput {
        h_f,
        h_t,
        concat: joined,
    }
}

/// Forward pass through both interaction terms using the linear-time route.
pub fn interaction_forward<T: Scalar>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
) -> Result<InteractionOutput<T>> {
    interaction_forward_with(x, p, Kernel::Fast)
}

pub fn interaction_forward_with<T: Scalar>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
    kernel: Kernel,
) -> Result<InteractionOutput<T>> {
    p.check_window(x)?;
    let (h_f, h_t) = match kernel {
        Kernel::Fast => (
            feature_fast_impl(x, p, &mut NoCount),
            temporal_fast_impl(x, p, &mut NoCount),
        ),
        Kernel::Naive => (
            feature_naive_impl(x, p, &mut NoCount),
            temporal_naive_impl(x, p, &mut NoCount),
        ),
    };
    Ok(concat(h_f, h_t))
}

/// Gradients of the interaction layer: parameters and window entries.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionGrads<T> {
    pub params: CollabMachineParams<T>,
    pub input: Matrix<T>,
}

fn check_upstream<T: Scalar>(x: &Matrix<T>, upstream: &[T]) -> Result<()> {
    let expected = x.rows() + x.cols();
    if upstream.len() != expected {
        return Err(Error::DimensionMismatch {
            what: "interaction upstream gradient",
            expected,
            found: upstream.len(),
        });
    }
    Ok(())
}

/// Contracts `upstream` (length `omega + m`, laid out like `concat`) with the
/// Jacobian of the layer.
pub fn interaction_backward<T: Scalar>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
    upstream: &[T],
) -> Result<InteractionGrads<T>> {
    interaction_backward_with(x, p, upstream, Kernel::Fast)
}

pub fn interaction_backward_with<T: Scalar>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
    upstream: &[T],
    kernel: Kernel,
) -> Result<InteractionGrads<T>> {
    p.check_window(x)?;
    check_upstream(x, upstream)?;
    let (omega, m) = x.shape();
    let mut grads = InteractionGrads {
        params: CollabMachineParams::zeros(omega, m),
        input: Matrix::zeros(omega, m),
    };
    let (up_f, up_t) = upstream.split_at(omega);
    match kernel {
        Kernel::Fast => {
            feature_backward_fast(x, p, up_f, &mut grads);
            temporal_backward_fast(x, p, up_t, &mut grads);
        }
        Kernel::Naive => {
            feature_backward_naive(x, p, up_f, &mut grads);
            temporal_backward_naive(x, p, up_t, &mut grads);
        }
    }
    Ok(grads)
}

// d out_r / d v_i = x_ri (S_r - x_ri v_i), d out_r / d x_ri = w_i + v_i (S_r - x_ri v_i)
// with S_r = sum_i x_ri v_i.
fn feature_backward_fast<T: Scalar>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
    up: &[T],
    grads: &mut InteractionGrads<T>,
) {
    let g = &mut grads.params;
    for (r, &u) in up.iter().enumerate() {
        let row = x.row(r);
        let s: T = row.iter().zip(&p.feat_v).map(|(&xi, &vi)| xi * vi).sum();
        g.feat_bias += u;
        let grad_row = grads.input.row_mut(r);
        for i in 0..row.len() {
            let rest = s - row[i] * p.feat_v[i];
            g.feat_w[i] += u * row[i];
            g.feat_v[i] += u * row[i] * rest;
            grad_row[i] += u * (p.feat_w[i] + p.feat_v[i] * rest);
        }
    }
}

fn temporal_backward_fast<T: Scalar>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
    up: &[T],
    grads: &mut InteractionGrads<T>,
) {
    let (omega, m) = x.shape();
    let mut s = vec![T::zero(); m];
    for t in 0..omega {
        for (sk, &xv) in s.iter_mut().zip(x.row(t)) {
            *sk += xv * p.time_v[t];
        }
    }
    let g = &mut grads.params;
    g.time_bias += up.iter().copied().sum();
    for t in 0..omega {
        let row = x.row(t);
        let (w, v) = (p.time_w[t], p.time_v[t]);
        let grad_row = grads.input.row_mut(t);
        for k in 0..m {
            let rest = s[k] - row[k] * v;
            g.time_w[t] += up[k] * row[k];
            g.time_v[t] += up[k] * row[k] * rest;
            grad_row[k] += up[k] * (w + v * rest);
        }
    }
}

fn feature_backward_naive<T: Scalar>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
    up: &[T],
    grads: &mut InteractionGrads<T>,
) {
    let m = x.cols();
    let g = &mut grads.params;
    for (r, &u) in up.iter().enumerate() {
        let row = x.row(r);
        g.feat_bias += u;
        let grad_row = grads.input.row_mut(r);
        for i in 0..m {
            g.feat_w[i] += u * row[i];
            grad_row[i] += u * p.feat_w[i];
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let vv = p.feat_v[i] * p.feat_v[j];
                let xx = row[i] * row[j];
                g.feat_v[i] += u * xx * p.feat_v[j];
                g.feat_v[j] += u * xx * p.feat_v[i];
                grad_row[i] += u * row[j] * vv;
                grad_row[j] += u * row[i] * vv;
            }
        }
    }
}

fn temporal_backward_naive<T: Scalar>(
    x: &Matrix<T>,
    p: &CollabMachineParams<T>,
    up: &[T],
    grads: &mut InteractionGrads<T>,
) {
    let (omega, m) = x.shape();
    let g = &mut grads.params;
    for k in 0..m {
        let u = up[k];
        g.time_bias += u;
        for t in 0..omega {
            g.time_w[t] += u * x[(t, k)];
            grads.input[(t, k)] += u * p.time_w[t];
        }
        for s in 0..omega {
            for t in (s + 1)..omega {
                let vv = p.time_v[s] * p.time_v[t];
                let xx = x[(s, k)] * x[(t, k)];
                g.time_v[s] += u * xx * p.time_v[t];
                g.time_v[t] += u * xx * p.time_v[s];
                grads.input[(s, k)] += u * x[(t, k)] * vv;
                grads.input[(t, k)] += u * x[(s, k)] * vv;
            }
        }
    }
}
