// SPDX-License-Identifier: MIT OR Apache-2.0

//! Anomaly scoring, thresholding, point adjustment and precision/recall/F1.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::MetricDataset;
use crate::error::{Error, Result};
use crate::model::{loss_mse, ForecastModel};
use crate::preprocess::{apply_normalizer, make_windows, NormalizationParams, DEFAULT_TAU_TEST};
use crate::scalar::Scalar;

/// Default spacing of the threshold grid over `[0, 1]`.
pub const DEFAULT_THRESHOLD_STEP: f64 = 0.1;

pub const SCORE_CSV_HEADER: &str = "timestamp_index,score";

/// One score per scored test timestamp, starting at `offset`.
///
/// With the sigmoid-of-MSE score every value lies in `[0.5, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSeries<T> {
    pub scores: Vec<T>,
    /// Index of the first scored timestamp (the window size).
    pub offset: usize,
}

impl<T> ScoreSeries<T> {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Scores every stride-1 window of `test` by `sigmoid(mse(prediction, target))`.
pub fn score_series<T: Scalar>(
    model: &ForecastModel<T>,
    test: &MetricDataset<T>,
    normalizer: &NormalizationParams<T>,
) -> Result<ScoreSeries<T>> {
    score_series_with(model, test, normalizer, 1)
}

/// As [`score_series`], optionally spreading windows over `threads` workers.
/// Output does not depend on the thread count.
pub fn score_series_with<T: Scalar>(
    model: &ForecastModel<T>,
    test: &MetricDataset<T>,
    normalizer: &NormalizationParams<T>,
    threads: usize,
) -> Result<ScoreSeries<T>> {
    if test.metrics() != model.metrics() {
        return Err(Error::DimensionMismatch {
            what: "test metric count (model m vs data m)",
            expected: model.metrics(),
            found: test.metrics(),
        });
    }
    let normalized = apply_normalizer(normalizer, test)?;
    let windows = make_windows(&normalized, model.omega(), DEFAULT_TAU_TEST)?;
    let score_one = |i: usize| -> Result<T> {
        let pred = model.forward(&windows.windows[i])?;
        Ok(sigmoid(loss_mse(&pred, &windows.targets[i])?))
    };
    let scores = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| (0..windows.len()).into_par_iter().map(score_one).collect())
    } else {
        (0..windows.len())
            .map(score_one)
            .collect::<Result<Vec<T>>>()
    }?;
    Ok(ScoreSeries {
        scores,
        offset: model.omega(),
    })
}

/// `pred[t] = scores[t] >= theta`.
pub fn apply_threshold<T: Scalar>(s: &ScoreSeries<T>, theta: T) -> Vec<bool> {
    s.scores.iter().map(|&v| v >= theta).collect()
}

fn check_lengths(pred: &[bool], labels: &[bool]) -> Result<()> {
    if pred.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "prediction/label length",
            expected: labels.len(),
            found: pred.len(),
        });
    }
    Ok(())
}

/// Marks a whole labelled anomaly segment as detected when any point in it
/// is predicted anomalous. Predictions outside labelled segments are kept.
pub fn point_adjust(pred: &[bool], labels: &[bool]) -> Result<Vec<bool>> {
    check_lengths(pred, labels)?;
    let mut out = pred.to_vec();
    let mut start = 0;
    while start < labels.len() {
        if !labels[start] {
            start += 1;
            continue;
        }
        let end = labels[start..]
            .iter()
            .position(|&l| !l)
            .map_or(labels.len(), |n| start + n);
        if pred[start..end].iter().any(|&p| p) {
            out[start..end].fill(true);
        }
        start = end;
    }
    Ok(out)
}

/// Confusion counts and derived metrics for one prediction series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub adjusted: bool,
}

impl EvalReport {
    /// Builds the report from counts; undefined ratios are 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            threshold: None,
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            adjusted: false,
        }
    }

    /// `key = value` lines.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        if let Some(t) = self.threshold {
            let _ = writeln!(s, "threshold = {t:?}");
        }
        let _ = writeln!(s, "tp = {}", self.tp);
        let _ = writeln!(s, "fp = {}", self.fp);
        let _ = writeln!(s, "fn = {}", self.fn_);
        let _ = writeln!(s, "precision = {:?}", self.precision);
        let _ = writeln!(s, "recall = {:?}", self.recall);
        let _ = writeln!(s, "f1 = {:?}", self.f1);
        let _ = writeln!(s, "adjusted = {}", self.adjusted);
        s
    }
}

/// Pointwise TP/FP/FN and precision, recall, F1.
pub fn evaluate(pred: &[bool], labels: &[bool]) -> Result<EvalReport> {
    check_lengths(pred, labels)?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &l) in pred.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(EvalReport::from_counts(tp, fp, fn_))
}

/// `{0, step, 2 step, ...} ∩ [0, 1]`. When `1/step` is an integer `n` the
/// points are computed as `k / n` so that e.g. 0.3 is the nearest double.
pub fn threshold_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold step must lie in (0, 1], got {step}"
        )));
    }
    let n = (1.0 / step).round();
    if ((n * step) - 1.0).abs() < 1e-9 {
        let n = n as usize;
        return Ok((0..=n).map(|k| k as f64 / n as f64).collect());
    }
    let count = (1.0 / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| k as f64 * step).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub best: EvalReport,
    /// One report per grid threshold, ascending.
    pub reports: Vec<EvalReport>,
}

/// Evaluates every grid threshold; the best report maximizes F1, ties going
/// to the smallest threshold. `labels` must already be aligned with the
/// scores (the first `offset` timestamps trimmed).
pub fn sweep_threshold<T: Scalar>(
    s: &ScoreSeries<T>,
    labels: &[bool],
    step: f64,
    adjust: bool,
) -> Result<Sweep> {
    if labels.len() != s.len() {
        return Err(Error::DimensionMismatch {
            what: "aligned label length",
            expected: s.len(),
            found: labels.len(),
        });
    }
    let mut reports = Vec::new();
    for theta in threshold_grid(step)? {
        let mut pred = apply_threshold(s, T::of(theta));
        if adjust {
            pred = point_adjust(&pred, labels)?;
        }
        let mut r = evaluate(&pred, labels)?;
        r.threshold = Some(theta);
        r.adjusted = adjust;
        reports.push(r);
    }
    let mut best = &reports[0];
    for r in &reports[1..] {
        if r.f1 > best.f1 {
            best = r;
        }
    }
    Ok(Sweep {
        best: best.clone(),
        reports,
    })
}

/// Drops the labels of timestamps that have no score.
pub fn align_labels<T>(s: &ScoreSeries<T>, labels: &[bool]) -> Result<Vec<bool>> {
    if labels.len() != s.offset + s.len() {
        return Err(Error::DimensionMismatch {
            what: "label length (offset + scores)",
            expected: s.offset + s.len(),
            found: labels.len(),
        });
    }
    Ok(labels[s.offset..].to_vec())
}

/// Unweighted mean of per-entity best F1.
pub fn mean_f1(reports: &[EvalReport]) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().map(|r| r.f1).sum::<f64>() / reports.len() as f64
}

pub fn save_scores_csv<T: Scalar>(path: impl AsRef<Path>, s: &ScoreSeries<T>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "{SCORE_CSV_HEADER}").map_err(io)?;
    for (i, v) in s.scores.iter().enumerate() {
        writeln!(out, "{},{}", s.offset + i, v).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a score CSV; timestamp indices must be consecutive.
pub fn load_scores_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<ScoreSeries<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == SCORE_CSV_HEADER => {}
        Some(Err(e)) => return Err(Error::io(path, e)),
        _ => {
            return Err(Error::Parse {
                row: 0,
                message: format!("expected header {SCORE_CSV_HEADER:?}"),
            })
        }
    }
    let mut offset = None;
    let mut scores = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let (ts, score) = line.split_once(',').ok_or_else(|| Error::Parse {
            row,
            message: "expected two fields".into(),
        })?;
        let ts: usize = ts.trim().parse().map_err(|_| Error::Parse {
            row,
            message: format!("bad timestamp index {ts:?}"),
        })?;
        let first = *offset.get_or_insert(ts);
        if ts != first + scores.len() {
            return Err(Error::Parse {
                row,
                message: format!("timestamp {ts} breaks the consecutive sequence"),
            });
        }
        let v: f64 = score.trim().parse().map_err(|_| Error::Parse {
            row,
            message: format!("bad score {score:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col: 2 });
        }
        scores.push(T::of(v));
    }
    let offset = offset.ok_or_else(|| Error::EmptyInput(path.display().to_string()))?;
    Ok(ScoreSeries { scores, offset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&b| b == 1).collect()
    }

    fn series(scores: &[f64]) -> ScoreSeries<f64> {
        ScoreSeries {
            scores: scores.to_vec(),
            offset: 0,
        }
    }

    #[test]
    fn sigmoid_range() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(30.0f64) < 1.0 && sigmoid(30.0f64) > 0.999_999);
        assert!(sigmoid(1.0f64) > sigmoid(0.5f64));
    }

    #[test]
    fn thresholds() {
        let s = series(&[0.5, 0.7]);
        assert_eq!(apply_threshold(&s, 0.0), vec![true, true]);
        assert_eq!(apply_threshold(&s, 1.0), vec![false, false]);
        assert_eq!(apply_threshold(&s, 0.6), vec![false, true]);
    }

    #[test]
    fn point_adjust_examples() {
        assert_eq!(
            point_adjust(&bits(&[0, 0, 1, 0, 0]), &bits(&[0, 1, 1, 1, 0])).unwrap(),
            bits(&[0, 1, 1, 1, 0])
        );
        assert_eq!(
            point_adjust(&bits(&[0, 0, 0, 0]), &bits(&[0, 1, 1, 0])).unwrap(),
            bits(&[0, 0, 0, 0])
        );
        let pred = bits(&[1, 0, 1, 1, 0]);
        assert_eq!(point_adjust(&pred, &bits(&[0; 5])).unwrap(), pred);
        assert!(point_adjust(&pred, &bits(&[0; 4])).is_err());
        // Segments touching both ends.
        assert_eq!(
            point_adjust(&bits(&[0, 1, 0, 0, 1]), &bits(&[1, 1, 0, 1, 1])).unwrap(),
            bits(&[1, 1, 0, 1, 1])
        );
    }

    #[test]
    fn evaluate_examples() {
        let y = bits(&[0, 1, 0, 1]);
        let r = evaluate(&y, &y).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));

        let r = EvalReport::from_counts(2, 1, 1);
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);

        let r = evaluate(&bits(&[0, 0, 0]), &bits(&[0, 1, 1])).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        assert_eq!((r.tp, r.fp, r.fn_), (0, 0, 2));
    }

    #[test]
    fn grid() {
        let g = threshold_grid(0.1).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[10], 1.0);
        assert_eq!(
            threshold_grid(0.25).unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(threshold_grid(0.3).unwrap().len(), 4);
        assert!(threshold_grid(0.0).is_err());
        assert!(threshold_grid(1.5).is_err());
    }

    #[test]
    fn separable_sweep_prefers_smallest_tied_threshold() {
        // Normal points score 0.55, anomalies 0.8: any θ in (0.55, 0.8] separates.
        let mut scores = vec![0.55; 40];
        let mut labels = vec![false; 40];
        for i in (10..15).chain(30..33) {
            scores[i] = 0.8;
            labels[i] = true;
        }
        let sweep = sweep_threshold(&series(&scores), &labels, 0.1, true).unwrap();
        assert_eq!(sweep.reports.len(), 11);
        let perfect: Vec<f64> = sweep
            .reports
            .iter()
            .filter(|r| r.f1 == 1.0)
            .map(|r| r.threshold.unwrap())
            .collect();
        assert_eq!(perfect, vec![0.6, 0.7, 0.8]);
        assert_eq!(sweep.best.threshold, Some(0.6));
        assert_eq!(sweep.best.f1, 1.0);
        assert!(sweep.reports.iter().all(|r| r.f1 <= sweep.best.f1));
    }

    #[test]
    fn label_alignment() {
        let s = ScoreSeries {
            scores: vec![0.5; 3],
            offset: 2,
        };
        assert_eq!(
            align_labels(&s, &bits(&[1, 1, 0, 1, 0])).unwrap(),
            bits(&[0, 1, 0])
        );
        assert!(align_labels(&s, &bits(&[0, 1, 0])).is_err());
        assert!(sweep_threshold(&s, &bits(&[0, 1]), 0.1, true).is_err());
    }

    #[test]
    fn score_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = ScoreSeries {
            scores: vec![0.5, 0.731_058_578_630_004_9, 0.999],
            offset: 32,
        };
        save_scores_csv(&p, &s).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("timestamp_index,score\n32,0.5\n"));
        assert_eq!(load_scores_csv::<f64>(&p).unwrap(), s);
        std::fs::write(&p, "timestamp_index,score\n3,0.5\n5,0.6\n").unwrap();
        assert!(load_scores_csv::<f64>(&p).is_err());
    }

    #[test]
    fn key_value_report() {
        let mut r = EvalReport::from_counts(1, 0, 1);
        r.threshold = Some(0.6);
        let text = r.to_key_value();
        assert!(text.contains("threshold = 0.6\n"));
        assert!(text.contains("fn = 1\n"));
        assert!(text.contains("recall = 0.5\n"));
    }

    proptest! {
        #[test]
        fn raising_threshold_never_adds_positives(
            scores in prop::collection::vec(0.5f64..1.0, 1..60),
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let s = series(&scores);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let count = |t| apply_threshold(&s, t).iter().filter(|&&p| p).count();
            prop_assert!(count(hi) <= count(lo));
        }

        #[test]
        fn f1_matches_harmonic_mean(tp in 0usize..500, fp in 0usize..500, fn_ in 0usize..500) {
            let r = EvalReport::from_counts(tp, fp, fn_);
            let expected = if r.precision + r.recall > 0.0 {
                2.0 * r.precision * r.recall / (r.precision + r.recall)
            } else { 0.0 };
            prop_assert_eq!(r.f1, expected);
        }
    }
}
