// SPDX-License-Identifier: MIT OR Apache-2.0

//! Resolved run settings. Written to the output directory by every command
//! and accepted back through `--config`.

use std::path::{Path, PathBuf};

use crossmetric::{LossKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const DEFAULT_OMEGA: usize = 32;
pub const DEFAULT_OUTPUT_DIR: &str = "crossmetric-out";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    #[default]
    Train,
    Detect,
    Evaluate,
    Bench,
    Generate,
}

/// Layout of `--data` files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    /// Header row, one column per metric, optional trailing `label` column.
    #[default]
    Csv,
    /// Headerless comma-separated rows.
    Smd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    pub command: CommandKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<PathBuf>,
    pub format: DataFormat,
    pub output_dir: PathBuf,
    pub omega: usize,
    pub tau_train: usize,
    pub tau_test: usize,
    pub threshold_step: f64,
    pub adjust: bool,
    pub l2_loss: bool,
    pub train: TrainConfig,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            command: CommandKind::default(),
            config_path: None,
            data: None,
            labels: None,
            model: None,
            scores: None,
            format: DataFormat::default(),
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
            omega: DEFAULT_OMEGA,
            tau_train: crossmetric::preprocess::DEFAULT_TAU_TRAIN,
            tau_test: crossmetric::preprocess::DEFAULT_TAU_TEST,
            threshold_step: crossmetric::detector::DEFAULT_THRESHOLD_STEP,
            adjust: true,
            l2_loss: false,
            train: TrainConfig::default(),
        }
    }
}

/// Command-line values; `None` and `false` leave the config file untouched.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub format: Option<DataFormat>,
    pub out: Option<PathBuf>,
    pub omega: Option<usize>,
    pub tau_train: Option<usize>,
    pub tau_test: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub threshold_step: Option<f64>,
    pub ablate_cm: bool,
    pub pooled_interactions: bool,
    pub relu_output: bool,
    pub l2_loss: bool,
    pub no_adjust: bool,
}

impl RunManifest {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> Result<String, toml::ser::Error> {
        toml::to_string_pretty(self)
    }

    /// Config file (if any), then command-line overrides.
    pub fn resolve(
        command: CommandKind,
        config: Option<&Path>,
        o: Overrides,
    ) -> Result<Self, CliError> {
        let mut m = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Input(format!("cannot read config {}: {e}", path.display()))
                })?;
                Self::from_toml(&text).map_err(|e| {
                    CliError::Input(format!("invalid config {}: {e}", path.display()))
                })?
            }
            None => Self::default(),
        };
        m.command = command;
        m.config_path = config.map(Path::to_path_buf);
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = o.$field { m.$field = Some(v); } )* };
        }
        take!(data, labels, model, scores);
        if let Some(v) = o.format {
            m.format = v;
        }
        if let Some(v) = o.out {
            m.output_dir = v;
        }
        if let Some(v) = o.omega {
            m.omega = v;
        }
        if let Some(v) = o.tau_train {
            m.tau_train = v;
        }
        if let Some(v) = o.tau_test {
            m.tau_test = v;
        }
        if let Some(v) = o.threshold_step {
            m.threshold_step = v;
        }
        if let Some(v) = o.seed {
            m.train.seed = v;
        }
        if let Some(v) = o.threads {
            m.train.threads = v;
        }
        m.train.ablate_cm |= o.ablate_cm;
        m.train.pooled_interactions |= o.pooled_interactions;
        m.train.relu_output |= o.relu_output;
        if o.no_adjust {
            m.adjust = false;
        }
        if o.l2_loss || m.l2_loss {
            m.train.loss = LossKind::L2;
        }
        m.l2_loss = m.train.loss == LossKind::L2;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Input(msg));
        if self.omega == 0 {
            return bad("omega must be positive".into());
        }
        if self.tau_train == 0 || self.tau_test == 0 {
            return bad("strides must be positive".into());
        }
        if !(self.threshold_step > 0.0 && self.threshold_step <= 1.0) {
            return bad(format!(
                "threshold step must lie in (0, 1], got {}",
                self.threshold_step
            ));
        }
        if i64::try_from(self.train.seed).is_err() {
            return bad("seed must fit in a signed 64-bit integer".into());
        }
        self.train
            .validate()
            .map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn write(&self) -> Result<PathBuf, CliError> {
        let text = self
            .to_toml()
            .map_err(|e| CliError::Runtime(format!("cannot serialize manifest: {e}")))?;
        let path = self.output_dir.join(MANIFEST_FILE);
        std::fs::write(&path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}
