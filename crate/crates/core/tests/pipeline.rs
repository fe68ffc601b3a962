// SPDX-License-Identifier: MIT OR Apache-2.0

use crossmetric::bench::{run_efficiency_suite, BenchConfig, Phase};
use crossmetric::dataio::{load_model, save_model, ModelBundle};
use crossmetric::detector::{align_labels, score_series, score_series_with, sweep_threshold};
use crossmetric::model::train;
use crossmetric::synthetic::{generate, SyntheticConfig};
use crossmetric::{Kernel, TrainConfig};

fn quick_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        hidden: vec![32, 16],
        max_epochs: 15,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn train_save_load_score() {
    let data = generate::<f64>(&SyntheticConfig {
        length: 3000,
        anomaly_segments: 6,
        seed: 11,
        ..Default::default()
    })
    .unwrap();
    let out = train(&data.train, &quick_cfg(11), 16, 5).unwrap();
    let scores = score_series(&out.model, &data.test, &out.normalizer).unwrap();
    assert_eq!(scores.len(), data.test.len() - 16);
    assert_eq!(scores.offset, 16);
    assert!(scores.scores.iter().all(|&s| (0.5..1.0).contains(&s)));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.xmf");
    save_model(
        &path,
        &ModelBundle {
            model: out.model.clone(),
            normalizer: out.normalizer.clone(),
        },
    )
    .unwrap();
    let loaded = load_model::<f64>(&path).unwrap();
    let again = score_series(&loaded.model, &data.test, &loaded.normalizer).unwrap();
    assert_eq!(scores.scores, again.scores);
    assert_eq!(
        scores.scores,
        score_series_with(&out.model, &data.test, &out.normalizer, 3)
            .unwrap()
            .scores
    );

    let labels = align_labels(&scores, data.test.labels().unwrap()).unwrap();
    let adjusted = sweep_threshold(&scores, &labels, 0.1, true).unwrap();
    let raw = sweep_threshold(&scores, &labels, 0.1, false).unwrap();
    for (a, r) in adjusted.reports.iter().zip(&raw.reports) {
        assert!(a.recall >= r.recall);
    }
}

#[test]
fn f32_pipeline_runs() {
    let data = generate::<f32>(&SyntheticConfig {
        length: 2000,
        anomaly_segments: 4,
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let out = train(
        &data.train,
        &TrainConfig {
            max_epochs: 3,
            ..quick_cfg(2)
        },
        8,
        5,
    )
    .unwrap();
    let s = score_series(&out.model, &data.test, &out.normalizer).unwrap();
    assert_eq!(s.len(), data.test.len() - 8);
}

#[test]
fn efficiency_suite_shape_and_kernel_equivalence() {
    let data = generate::<f64>(&SyntheticConfig {
        length: 1400,
        anomaly_segments: 2,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let cfg = BenchConfig {
        train: TrainConfig {
            hidden: vec![8],
            ..TrainConfig::default()
        },
        ..BenchConfig::default()
    };
    let report = run_efficiency_suite(&data.train, &data.test, &cfg).unwrap();
    assert_eq!(report.results.len(), 20);
    assert!(report.calibration_seconds >= 0.0);
    for r in &report.results {
        assert!(r.wall_seconds > 0.0);
        assert_eq!(r.repeats, 3);
    }
    for omega in [16, 32, 64, 128, 256] {
        let rows: Vec<_> = report
            .results
            .iter()
            .filter(|r| r.window_size == omega)
            .collect();
        let train_n = rows
            .iter()
            .find(|r| r.phase == Phase::Train)
            .unwrap()
            .windows_processed;
        let pred_n = rows
            .iter()
            .find(|r| r.phase == Phase::Predict)
            .unwrap()
            .windows_processed;
        assert!(pred_n > train_n);
        let loss = |k: Kernel| {
            report
                .epoch_losses
                .iter()
                .find(|(w, kk, _)| *w == omega && *kk == k)
                .unwrap()
                .2
        };
        assert!((loss(Kernel::Fast) - loss(Kernel::Naive)).abs() <= 1e-9);
    }
    let short = generate::<f64>(&SyntheticConfig {
        length: 400,
        anomaly_segments: 0,
        ..Default::default()
    })
    .unwrap();
    assert!(run_efficiency_suite(&short.train, &short.test, &cfg).is_err());
}
