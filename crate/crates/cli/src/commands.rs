// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crossmetric::bench::{
    fit_scaling_exponent, results_csv, results_long_csv, run_efficiency_suite, run_kernel_scaling,
    scaling_exponent_for, BenchConfig, KernelTiming, Phase, DEFAULT_WINDOW_SIZES,
};
use crossmetric::dataio::{
    csv_has_label_column, load_csv, load_label_file, load_model, load_smd_entity, save_csv,
    save_model, ModelBundle,
};
use crossmetric::detector::{
    align_labels, load_scores_csv, save_scores_csv, score_series_with, sweep_threshold, Sweep,
};
use crossmetric::model::train;
use crossmetric::synthetic::{generate, SyntheticConfig};
use crossmetric::{Kernel, MetricDataset};

use crate::manifest::{DataFormat, RunManifest};
use crate::CliError;

pub const MODEL_FILE: &str = "model.xmf";
pub const LOSS_FILE: &str = "loss_history.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const BENCH_FILE: &str = "bench.csv";
pub const BENCH_LONG_FILE: &str = "bench_long.csv";
pub const KERNEL_FILE: &str = "kernel_scaling.csv";

/// Windows per kernel-scaling sample.
const KERNEL_WINDOWS: usize = 64;

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    let path = value
        .as_deref()
        .ok_or_else(|| CliError::Input(format!("missing required input {flag}")))?;
    if !path.is_file() {
        return Err(CliError::Input(format!(
            "input file not found: {}",
            path.display()
        )));
    }
    Ok(path)
}

fn prepare_output(m: &RunManifest) -> Result<(), CliError> {
    fs::create_dir_all(&m.output_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", m.output_dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn load_data(path: &Path, format: DataFormat) -> Result<MetricDataset, CliError> {
    Ok(match format {
        DataFormat::Csv => load_csv(path, csv_has_label_column(path)?)?,
        DataFormat::Smd => load_smd_entity(path, None)?,
    })
}

fn load_labels(path: &Path) -> Result<Vec<bool>, CliError> {
    if csv_has_label_column(path).unwrap_or(false) {
        let d: MetricDataset = load_csv(path, true)?;
        return Ok(d.labels().map(<[bool]>::to_vec).unwrap_or_default());
    }
    Ok(load_label_file(path)?)
}

pub fn cmd_train(m: &RunManifest) -> Result<(), CliError> {
    let data = load_data(required(&m.data, "--data")?, m.format)?;
    prepare_output(m)?;
    let out = train(&data, &m.train, m.omega, m.tau_train)?;
    let bundle = ModelBundle {
        model: out.model,
        normalizer: out.normalizer,
    };
    save_model(m.output_dir.join(MODEL_FILE), &bundle)?;
    let mut history = String::from("epoch,loss\n");
    for (i, l) in out.loss_history.iter().enumerate() {
        let _ = writeln!(history, "{},{l}", i + 1);
    }
    write_text(&m.output_dir.join(LOSS_FILE), &history)?;
    m.write()?;
    let last = out.loss_history.last().copied().unwrap_or(f64::NAN);
    println!(
        "epochs={} final_loss={last:e} converged={} model={}",
        out.loss_history.len(),
        out.converged,
        m.output_dir.join(MODEL_FILE).display()
    );
    Ok(())
}

/// `explicit_omega` is the window size the user asked for, if any; it must
/// agree with the model's.
pub fn cmd_detect(m: &mut RunManifest, explicit_omega: Option<usize>) -> Result<(), CliError> {
    let model_path = required(&m.model, "--model")?.to_path_buf();
    let data = load_data(required(&m.data, "--data")?, m.format)?;
    if m.tau_test != 1 {
        return Err(CliError::Input(format!(
            "detect scores every timestamp; tau_test must be 1, got {}",
            m.tau_test
        )));
    }
    let bundle = load_model::<f64>(&model_path)?;
    let omega = bundle.model.omega();
    if let Some(w) = explicit_omega.filter(|&w| w != omega) {
        return Err(CliError::Input(format!(
            "--omega {w} does not match the model's window size {omega}"
        )));
    }
    m.omega = omega;
    prepare_output(m)?;
    let scores = score_series_with(&bundle.model, &data, &bundle.normalizer, m.train.threads)?;
    save_scores_csv(m.output_dir.join(SCORES_FILE), &scores)?;
    m.write()?;
    println!("scores={} offset={}", scores.len(), scores.offset);
    Ok(())
}

fn sweep_csv(sweep: &Sweep) -> String {
    let mut s = String::from("threshold,tp,fp,fn,precision,recall,f1,adjusted\n");
    for r in &sweep.reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.threshold.unwrap_or(f64::NAN),
            r.tp,
            r.fp,
            r.fn_,
            r.precision,
            r.recall,
            r.f1,
            r.adjusted
        );
    }
    s
}

fn report_text(sweep: &Sweep) -> String {
    let mut s = String::from("[best]\n");
    s.push_str(&sweep.best.to_key_value());
    for (i, r) in sweep.reports.iter().enumerate() {
        let _ = write!(s, "\n[sweep.{i}]\n{}", r.to_key_value());
    }
    s
}

pub fn cmd_evaluate(m: &RunManifest) -> Result<(), CliError> {
    let scores = load_scores_csv::<f64>(required(&m.scores, "--scores")?)?;
    let labels = load_labels(required(&m.labels, "--labels")?)?;
    let aligned = align_labels(&scores, &labels)?;
    prepare_output(m)?;
    let sweep = sweep_threshold(&scores, &aligned, m.threshold_step, m.adjust)?;
    write_text(&m.output_dir.join(SWEEP_FILE), &sweep_csv(&sweep))?;
    write_text(&m.output_dir.join(REPORT_FILE), &report_text(&sweep))?;
    m.write()?;
    let b = &sweep.best;
    println!(
        "threshold={} precision={:.4} recall={:.4} f1={:.4} adjusted={}",
        b.threshold.unwrap_or(f64::NAN),
        b.precision,
        b.recall,
        b.f1,
        b.adjusted
    );
    Ok(())
}

fn kernel_csv(rows: &[KernelTiming]) -> String {
    let mut s = String::from("window_size,kernel,wall_seconds,windows_processed,repeats\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:e},{},{}",
            r.window_size, r.kernel, r.wall_seconds, r.windows_processed, r.repeats
        );
    }
    s
}

pub fn cmd_bench(m: &RunManifest) -> Result<(), CliError> {
    let data = load_data(required(&m.data, "--data")?, m.format)?;
    let (train_half, test_half) = data.split_at(data.len() / 2)?;
    prepare_output(m)?;
    let cfg = BenchConfig {
        window_sizes: DEFAULT_WINDOW_SIZES.to_vec(),
        tau_train: m.tau_train,
        tau_test: m.tau_test,
        repeats: 3,
        train: m.train.clone(),
    };
    let report = run_efficiency_suite(&train_half, &test_half, &cfg)?;
    write_text(
        &m.output_dir.join(BENCH_FILE),
        &results_csv(&report.results),
    )?;
    write_text(
        &m.output_dir.join(BENCH_LONG_FILE),
        &results_long_csv(&report.results, report.calibration_seconds),
    )?;
    let kernels = run_kernel_scaling(
        &cfg.window_sizes,
        data.metrics(),
        KERNEL_WINDOWS,
        cfg.repeats,
        m.train.seed,
    )?;
    write_text(&m.output_dir.join(KERNEL_FILE), &kernel_csv(&kernels))?;
    m.write()?;

    println!("calibration_seconds={:e}", report.calibration_seconds);
    for phase in [Phase::Train, Phase::Predict] {
        for kernel in [Kernel::Fast, Kernel::Naive] {
            let slope = scaling_exponent_for(&report.results, phase, kernel)?;
            println!("{phase}/{kernel} slope={slope:.3}");
        }
    }
    for kernel in [Kernel::Fast, Kernel::Naive] {
        let points: Vec<(usize, f64)> = kernels
            .iter()
            .filter(|k| k.kernel == kernel)
            .map(|k| (k.window_size, k.wall_seconds))
            .collect();
        println!(
            "temporal-kernel/{kernel} slope={:.3}",
            fit_scaling_exponent(&points)?
        );
    }
    Ok(())
}

pub fn cmd_generate(m: &RunManifest) -> Result<(), CliError> {
    prepare_output(m)?;
    let cfg = SyntheticConfig {
        seed: m.train.seed,
        ..SyntheticConfig::default()
    };
    let data = generate::<f64>(&cfg)?;
    save_csv(m.output_dir.join("train.csv"), &data.train)?;
    save_csv(m.output_dir.join("test.csv"), &data.test)?;
    let mut labels = String::new();
    for &l in data.test.labels().unwrap_or_default() {
        labels.push_str(if l { "1\n" } else { "0\n" });
    }
    write_text(&m.output_dir.join("labels.txt"), &labels)?;
    m.write()?;
    println!(
        "train={} test={} metrics={} segments={}",
        data.train.len(),
        data.test.len(),
        data.train.metrics(),
        data.segments.len()
    );
    Ok(())
}
