// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crossmetric::dataio::load_model;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossmetric"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        ok(&[
            "generate",
            "--out",
            &s(&dir.path().join("data")),
            "--seed",
            "2",
        ]);
        let config = dir.path().join("quick.toml");
        std::fs::write(&config, "[train]\nmax_epochs = 5\nhidden = [16]\n").unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn p(&self, rel: &str) -> String {
        s(&self.path(rel))
    }

    fn train(&self, out: &str, extra: &[&str]) {
        let (cfg, data, out) = (self.p("quick.toml"), self.p("data/train.csv"), self.p(out));
        let mut args = vec![
            "train", "--config", &cfg, "--data", &data, "--out", &out, "--omega", "16",
        ];
        args.extend_from_slice(extra);
        ok(&args);
    }
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn missing_inputs_exit_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = s(&dir.path().join("absent.csv"));
    for cmd in ["train", "bench"] {
        let out = run(&[cmd, "--data", &missing, "--out", &s(dir.path())]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(&missing));
    }
    let out = run(&["train", "--out", &s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["train", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn train_writes_model_history_and_manifest() {
    let f = Fixture::new();
    f.train("full", &[]);
    f.train("ablated", &["--ablate-cm"]);
    let full = load_model::<f64>(f.path("full/model.xmf")).unwrap();
    let ablated = load_model::<f64>(f.path("ablated/model.xmf")).unwrap();
    assert_eq!(full.model.params.mlp.widths()[0], 16 + 5);
    assert_eq!(ablated.model.params.mlp.widths()[0], 5);
    let history = csv_rows(&f.path("full/loss_history.csv"));
    assert!(!history.is_empty() && history.len() <= 5);
    let manifest = std::fs::read_to_string(f.path("ablated/manifest.toml")).unwrap();
    assert!(manifest.contains("ablate_cm = true"));
    assert!(manifest.contains("omega = 16"));
    assert!(manifest.contains("max_epochs = 5"));
}

#[test]
fn detect_counts_and_dimension_check() {
    let f = Fixture::new();
    f.train("m", &[]);
    let (model, test) = (f.p("m/model.xmf"), f.p("data/test.csv"));
    let stdout = ok(&[
        "detect",
        "--data",
        &test,
        "--model",
        &model,
        "--out",
        &f.p("m"),
    ]);
    let rows = csv_rows(&f.path("m/scores.csv"));
    assert_eq!(rows.len(), 2500 - 16);
    assert_eq!(rows[0][0], "16");
    assert!(stdout.contains("scores=2484"));

    let narrow = f.path("narrow.csv");
    std::fs::write(&narrow, "a,b\n".to_owned() + &"0.1,0.2\n".repeat(40)).unwrap();
    let out = run(&[
        "detect",
        "--data",
        &s(&narrow),
        "--model",
        &model,
        "--out",
        &f.p("x"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model m vs data m"));
}

#[test]
fn evaluate_reports_and_adjustment() {
    let f = Fixture::new();
    f.train("m", &[]);
    ok(&[
        "detect",
        "--data",
        &f.p("data/test.csv"),
        "--model",
        &f.p("m/model.xmf"),
        "--out",
        &f.p("m"),
    ]);
    let (scores, labels) = (f.p("m/scores.csv"), f.p("data/labels.txt"));
    ok(&[
        "evaluate",
        "--scores",
        &scores,
        "--labels",
        &labels,
        "--out",
        &f.p("adj"),
    ]);
    ok(&[
        "evaluate",
        "--scores",
        &scores,
        "--labels",
        &labels,
        "--out",
        &f.p("raw"),
        "--no-adjust",
    ]);
    let adj = csv_rows(&f.path("adj/sweep.csv"));
    let raw = csv_rows(&f.path("raw/sweep.csv"));
    assert_eq!(adj.len(), 11);
    for (a, r) in adj.iter().zip(&raw) {
        let recall = |row: &[String]| row[5].parse::<f64>().unwrap();
        assert!(recall(r) <= recall(a));
    }
    let max_f1 = adj
        .iter()
        .map(|r| r[6].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    let report = std::fs::read_to_string(f.path("adj/report.txt")).unwrap();
    let best = report.split("\n\n").next().unwrap();
    assert!(best.contains(&format!("f1 = {max_f1:?}")), "{best}");
    assert_eq!(report.matches("[sweep.").count(), 11);
}

#[test]
fn evaluate_perfect_scores() {
    let dir = tempfile::tempdir().unwrap();
    let labels: Vec<u8> = (0..40)
        .map(|t| u8::from((12..18).contains(&t) || (30..33).contains(&t)))
        .collect();
    let mut scores = String::from("timestamp_index,score\n");
    for (t, &l) in labels.iter().enumerate().skip(4) {
        scores.push_str(&format!("{t},{}\n", if l == 1 { 0.85 } else { 0.52 }));
    }
    let label_text: String = labels.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(dir.path().join("scores.csv"), scores).unwrap();
    std::fs::write(dir.path().join("labels.txt"), label_text).unwrap();
    let stdout = ok(&[
        "evaluate",
        "--scores",
        &s(&dir.path().join("scores.csv")),
        "--labels",
        &s(&dir.path().join("labels.txt")),
        "--out",
        &s(dir.path()),
    ]);
    assert!(stdout.contains("threshold=0.6"), "{stdout}");
    assert!(stdout.contains("f1=1.0000"), "{stdout}");

    // Labels that do not cover the scored range.
    std::fs::write(dir.path().join("short.txt"), "0\n1\n").unwrap();
    let out = run(&[
        "evaluate",
        "--scores",
        &s(&dir.path().join("scores.csv")),
        "--labels",
        &s(&dir.path().join("short.txt")),
        "--out",
        &s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergence_exits_3() {
    let f = Fixture::new();
    let cfg = f.path("wild.toml");
    std::fs::write(
        &cfg,
        "[train]\nlearning_rate = 1e300\nmax_epochs = 3\nhidden = [8]\n",
    )
    .unwrap();
    let out = run(&[
        "train",
        "--config",
        &s(&cfg),
        "--data",
        &f.p("data/train.csv"),
        "--out",
        &f.p("w"),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn bench_writes_grid() {
    let f = Fixture::new();
    let cfg = f.path("bench.toml");
    std::fs::write(&cfg, "[train]\nhidden = [8]\n").unwrap();
    ok(&[
        "bench",
        "--config",
        &s(&cfg),
        "--data",
        &f.p("data/test.csv"),
        "--out",
        &f.p("b"),
    ]);
    let text = std::fs::read_to_string(f.path("b/bench.csv")).unwrap();
    assert!(text.starts_with("window_size,phase,kernel,wall_seconds,windows_processed,repeats\n"));
    assert_eq!(text.lines().count(), 21);
    assert!(f.path("b/bench_long.csv").is_file());
    assert!(f.path("b/kernel_scaling.csv").is_file());
    assert!(f.path("b/manifest.toml").is_file());
}
