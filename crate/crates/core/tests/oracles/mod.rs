// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reference computations written independently of the library code.

#![allow(dead_code)]

use crossmetric::matrix::Matrix;
use crossmetric::model::{loss, ForecastModel, LossKind};
use crossmetric::CollabMachineParams;

/// `h_f[r]` straight from the definition, every pair `i < j` visited.
pub fn direct_feature(x: &Matrix<f64>, p: &CollabMachineParams<f64>) -> Vec<f64> {
    let (omega, m) = x.shape();
    let mut out = vec![0.0; omega];
    for (r, h) in out.iter_mut().enumerate() {
        let mut acc = p.feat_bias;
        for i in 0..m {
            acc += p.feat_w[i] * x[(r, i)];
        }
        for i in 0..m {
            for j in (i + 1)..m {
                acc += x[(r, i)] * x[(r, j)] * p.feat_v[i] * p.feat_v[j];
            }
        }
        *h = acc;
    }
    out
}

/// `h_t[k]` straight from the definition.
pub fn direct_temporal(x: &Matrix<f64>, p: &CollabMachineParams<f64>) -> Vec<f64> {
    let (omega, m) = x.shape();
    let mut out = vec![0.0; m];
    for (k, h) in out.iter_mut().enumerate() {
        let mut acc = p.time_bias;
        for t in 0..omega {
            acc += p.time_w[t] * x[(t, k)];
        }
        for s in 0..omega {
            for t in (s + 1)..omega {
                acc += x[(s, k)] * x[(t, k)] * p.time_v[s] * p.time_v[t];
            }
        }
        *h = acc;
    }
    out
}

/// Relative difference with the denominator floored at one, so entries
/// near zero are judged on absolute error.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Point adjustment via label edges: a segment starts where the label rises
/// and ends where it falls.
pub fn point_adjust_oracle(pred: &[bool], labels: &[bool]) -> Vec<bool> {
    assert_eq!(pred.len(), labels.len());
    let n = labels.len();
    let mut starts = Vec::new();
    let mut ends = Vec::new();
    let mut prev = false;
    for (t, &l) in labels.iter().enumerate() {
        if l && !prev {
            starts.push(t);
        }
        if !l && prev {
            ends.push(t);
        }
        prev = l;
    }
    if prev {
        ends.push(n);
    }
    let mut out = pred.to_vec();
    for (&s, &e) in starts.iter().zip(&ends) {
        if (s..e).any(|t| pred[t]) {
            for v in &mut out[s..e] {
                *v = true;
            }
        }
    }
    out
}

pub fn recall(pred: &[bool], labels: &[bool]) -> f64 {
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 {
        return 0.0;
    }
    let tp = pred.iter().zip(labels).filter(|(&p, &l)| p && l).count();
    tp as f64 / pos as f64
}

/// Precision, recall and F1 from confusion counts, zero on empty denominators.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let (tp, fp, fn_) = (tp as f64, fp as f64, fn_ as f64);
    let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f = if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    };
    (p, r, f)
}

/// Outcome of comparing analytic gradients to central differences.
#[derive(Debug, Default)]
pub struct GradCheck {
    pub checked: usize,
    /// Coordinates where a perturbation moved a ReLU across its kink.
    pub skipped: usize,
    pub max_rel: f64,
    pub worst: String,
}

/// Central differences over every parameter of `model` for one window.
pub fn grad_check(
    model: &ForecastModel<f64>,
    x: &Matrix<f64>,
    target: &[f64],
    kind: LossKind,
    h: f64,
    floor: f64,
) -> GradCheck {
    let (_, grads) = model.backward(x, target, kind).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads
        .blocks()
        .into_iter()
        .map(|(n, s)| (n, s.to_vec()))
        .collect();
    let base_pattern = model.activation_pattern(x).unwrap();
    let eval = |m: &ForecastModel<f64>| loss(kind, &m.forward(x).unwrap(), target).unwrap();

    let mut out = GradCheck::default();
    let mut probe = model.clone();
    for (b, (name, g)) in analytic.iter().enumerate() {
        for (i, &a) in g.iter().enumerate() {
            let orig = probe.params.blocks()[b].1[i];
            let at = |v: f64, probe: &mut ForecastModel<f64>| {
                probe.params.blocks_mut()[b].1[i] = v;
                let pat = probe.activation_pattern(x).unwrap();
                (eval(probe), pat)
            };
            let (plus, pat_plus) = at(orig + h, &mut probe);
            let (minus, pat_minus) = at(orig - h, &mut probe);
            probe.params.blocks_mut()[b].1[i] = orig;
            if pat_plus != base_pattern || pat_minus != base_pattern {
                out.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            out.checked += 1;
            if rel > out.max_rel {
                out.max_rel = rel;
                out.worst = format!("{name}[{i}]: analytic {a:e} numeric {numeric:e}");
            }
        }
    }
    out
}
