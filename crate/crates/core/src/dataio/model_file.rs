// SPDX-License-Identifier: MIT OR Apache-2.0

//! Binary model container, all integers and floats little-endian:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "XMFM"
//! 4       4   u32     format version (1)
//! 8       1   u8      scalar width in bytes (4 = f32, 8 = f64)
//! 9       1   u8      flags: bit0 ablate_cm, bit1 pooled_interactions, bit2 relu_output
//! 10      2   u16     reserved, zero
//! 12      4   u32     omega
//! 16      4   u32     m
//! 20      4   u32     L, number of dense layers
//! 24      4(L+1) u32  layer widths d0..dL
//! ..      8   u64     number of scalars that follow
//! ..      W*n         scalars: cm.feat_bias, cm.feat_w[m], cm.feat_v[m],
//!                     cm.time_bias, cm.time_w[omega], cm.time_v[omega],
//!                     then per layer weight (d_i x d_{i+1}, row-major) and
//!                     bias (d_{i+1}), then normalizer mins[m] and maxs[m]
//! ..      4   u32     CRC-32 (IEEE) of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::interactions::{CollabMachineParams, Kernel};
use crate::model::{ForecastModel, MlpParams, ModelConfig, Params};
use crate::preprocess::NormalizationParams;
use crate::scalar::Scalar;

pub const MODEL_MAGIC: [u8; 4] = *b"XMFM";
pub const MODEL_FILE_VERSION: u32 = 1;

const FLAG_ABLATE: u8 = 1;
const FLAG_POOLED: u8 = 1 << 1;
const FLAG_RELU_OUTPUT: u8 = 1 << 2;

/// A trained model with the normalizer fitted on its training data.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle<T> {
    pub model: ForecastModel<T>,
    pub normalizer: NormalizationParams<T>,
}

pub fn encode_model<T: Scalar>(bundle: &ModelBundle<T>) -> Result<Vec<u8>> {
    let model = &bundle.model;
    let cfg = &model.config;
    if let Some(param) = model.params.first_non_finite() {
        return Err(Error::Format(format!(
            "refusing to save non-finite parameter {param}"
        )));
    }
    if bundle.normalizer.metrics() != cfg.metrics {
        return Err(Error::DimensionMismatch {
            what: "normalizer metric count",
            expected: cfg.metrics,
            found: bundle.normalizer.metrics(),
        });
    }
    let widths = cfg.widths();
    let u32_of = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} exceeds u32")))
    };

    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_FILE_VERSION.to_le_bytes());
    out.push(T::WIDTH);
    let mut flags = 0u8;
    if cfg.ablate_cm {
        flags |= FLAG_ABLATE;
    }
    if cfg.pooled_interactions {
        flags |= FLAG_POOLED;
    }
    if cfg.relu_output {
        flags |= FLAG_RELU_OUTPUT;
    }
    out.push(flags);
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&u32_of(cfg.omega, "omega")?.to_le_bytes());
    out.extend_from_slice(&u32_of(cfg.metrics, "m")?.to_le_bytes());
    out.extend_from_slice(&u32_of(widths.len() - 1, "layer count")?.to_le_bytes());
    for &w in &widths {
        out.extend_from_slice(&u32_of(w, "layer width")?.to_le_bytes());
    }
    let count = model.param_count() + 2 * cfg.metrics;
    out.extend_from_slice(&(count as u64).to_le_bytes());
    for (_, block) in model.params.blocks() {
        for &v in block {
            v.write_le(&mut out);
        }
    }
    for &v in bundle.normalizer.mins.iter().chain(&bundle.normalizer.maxs) {
        v.write_le(&mut out);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!(
                "truncated file: {what} needs {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn scalars<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        let w = T::WIDTH as usize;
        let raw = self.take(n * w, "parameters")?;
        Ok(raw.chunks_exact(w).map(T::read_le).collect())
    }
}

pub fn decode_model<T: Scalar>(bytes: &[u8]) -> Result<ModelBundle<T>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = cur.u32("version")?;
    if version != MODEL_FILE_VERSION {
        return Err(Error::Version {
            found: version,
            supported: MODEL_FILE_VERSION,
        });
    }
    let head = cur.take(4, "header")?;
    let (width, flags) = (head[0], head[1]);
    if width != T::WIDTH {
        return Err(Error::Format(format!(
            "file stores {width}-byte scalars, reader expects {}",
            T::WIDTH
        )));
    }
    if flags & !(FLAG_ABLATE | FLAG_POOLED | FLAG_RELU_OUTPUT) != 0 {
        return Err(Error::Format(format!("unknown flag bits {flags:#04x}")));
    }
    let omega = cur.u32("omega")? as usize;
    let metrics = cur.u32("m")? as usize;
    let layers = cur.u32("layer count")? as usize;
    if layers == 0 || layers > 1 << 16 {
        return Err(Error::Format(format!("implausible layer count {layers}")));
    }
    let widths = (0..=layers)
        .map(|_| cur.u32("layer widths").map(|w| w as usize))
        .collect::<Result<Vec<_>>>()?;
    let count = cur.u64("scalar count")? as usize;

    // Checksum covers everything before the trailing CRC; check the length
    // first so truncation is reported as such.
    let expected_len = cur
        .pos
        .checked_add(count.saturating_mul(width as usize))
        .and_then(|n| n.checked_add(4))
        .ok_or_else(|| Error::Format("scalar count overflows".into()))?;
    if bytes.len() < expected_len {
        return Err(Error::Format(format!(
            "truncated file: expected {expected_len} bytes, found {}",
            bytes.len()
        )));
    }
    if bytes.len() > expected_len {
        return Err(Error::Format(format!(
            "{} trailing bytes after checksum",
            bytes.len() - expected_len
        )));
    }
    let body = &bytes[..expected_len - 4];
    let stored = u32::from_le_bytes(bytes[expected_len - 4..].try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let config = ModelConfig {
        omega,
        metrics,
        hidden: widths[1..widths.len() - 1].to_vec(),
        ablate_cm: flags & FLAG_ABLATE != 0,
        pooled_interactions: flags & FLAG_POOLED != 0,
        relu_output: flags & FLAG_RELU_OUTPUT != 0,
        kernel: Kernel::Fast,
    };
    if config.widths() != widths {
        return Err(Error::Format(format!(
            "layer widths {widths:?} inconsistent with omega={omega}, m={metrics} and flags"
        )));
    }
    let mut params = Params {
        cm: CollabMachineParams::zeros(omega, metrics),
        mlp: MlpParams::zeros(&widths),
    };
    if count != params.param_count() + 2 * metrics {
        return Err(Error::Format(format!(
            "scalar count {count} does not match architecture ({} expected)",
            params.param_count() + 2 * metrics
        )));
    }
    for (_, block) in params.blocks_mut() {
        let values = cur.scalars::<T>(block.len())?;
        block.copy_from_slice(&values);
    }
    let mins = cur.scalars::<T>(metrics)?;
    let maxs = cur.scalars::<T>(metrics)?;
    if let Some(param) = params.first_non_finite() {
        return Err(Error::Format(format!("non-finite parameter {param}")));
    }
    Ok(ModelBundle {
        model: ForecastModel::from_parts(config, params)?,
        normalizer: NormalizationParams { mins, maxs },
    })
}

pub fn save_model<T: Scalar>(path: impl AsRef<Path>, bundle: &ModelBundle<T>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_model(bundle)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<ModelBundle<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
