use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ProbeError, Result, TrainConfig};
use crate::corpus_io::{io_err, CorpusError, Reader};

pub const PROBE_MAGIC: &[u8; 4] = b"S3MP";
pub const PROBE_VERSION: u16 = 1;

/// Training provenance stored in the JSON trailer of a probe file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub final_validation_loss: f64,
    pub config: Option<TrainConfig>,
}

/// A trained projection `W` (`d_out × d_in`, row-major) plus its margin.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeParams {
    pub layer: u16,
    d_in: usize,
    d_out: usize,
    pub margin: f64,
    weights: Vec<f32>,
    pub meta: ProbeMeta,
}

impl ProbeParams {
    pub fn new(layer: u16, d_in: usize, d_out: usize, margin: f64, weights: Vec<f32>) -> Result<Self> {
        if d_out == 0 || d_out >= d_in {
            return Err(ProbeError::InvalidConfig(format!(
                "projection must reduce dimension (d_out {d_out}, d_in {d_in})"
            )));
        }
        if !(margin > 0.0 && margin < 2.0) {
            return Err(ProbeError::InvalidConfig(format!("margin {margin} outside (0, 2)")));
        }
        if weights.len() != d_in * d_out {
            return Err(ProbeError::DimensionMismatch {
                expected: d_in * d_out,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(ProbeError::InvalidConfig("non-finite weight".into()));
        }
        Ok(ProbeParams {
            layer,
            d_in,
            d_out,
            margin,
            weights,
            meta: ProbeMeta::default(),
        })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    /// `W x`, accumulated in f64.
    pub fn project_frame(&self, x: &[f32]) -> Result<Vec<f32>> {
        if x.len() != self.d_in {
            return Err(ProbeError::DimensionMismatch {
                expected: self.d_in,
                got: x.len(),
            });
        }
        Ok(self
            .weights
            .chunks_exact(self.d_in)
            .map(|row| row.iter().zip(x).map(|(&w, &v)| w as f64 * v as f64).sum::<f64>() as f32)
            .collect())
    }

    pub(crate) fn project_f64(&self, x: &[f64]) -> Vec<f32> {
        self.weights
            .chunks_exact(self.d_in)
            .map(|row| row.iter().zip(x).map(|(&w, &v)| w as f64 * v).sum::<f64>() as f32)
            .collect()
    }

    /// Projects a row-major block of frames.
    pub fn project_frames(&self, frames: &[f32]) -> Result<Vec<f32>> {
        if !frames.len().is_multiple_of(self.d_in) {
            return Err(ProbeError::DimensionMismatch {
                expected: self.d_in,
                got: frames.len() % self.d_in,
            });
        }
        let mut out = Vec::with_capacity(frames.len() / self.d_in * self.d_out);
        for x in frames.chunks_exact(self.d_in) {
            out.extend(self.project_frame(x)?);
        }
        Ok(out)
    }
}

pub fn encode_probe(p: &ProbeParams) -> Result<Vec<u8>> {
    let meta = serde_json::to_vec(&p.meta)
        .map_err(|e| CorpusError::Data(format!("probe metadata: {e}")))?;
    let mut out = Vec::with_capacity(28 + p.weights.len() * 4 + meta.len());
    out.extend_from_slice(PROBE_MAGIC);
    out.extend_from_slice(&PROBE_VERSION.to_le_bytes());
    out.extend_from_slice(&p.layer.to_le_bytes());
    out.extend_from_slice(&(p.d_in as u32).to_le_bytes());
    out.extend_from_slice(&(p.d_out as u32).to_le_bytes());
    out.extend_from_slice(&p.margin.to_le_bytes());
    for w in &p.weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    Ok(out)
}

pub fn decode_probe(bytes: &[u8]) -> Result<ProbeParams> {
    let mut r = Reader::new(bytes);
    let magic = r
        .take(4)
        .map_err(|_| CorpusError::Format("file too short for magic".into()))?;
    if magic != PROBE_MAGIC {
        return Err(CorpusError::Format(format!("bad magic {magic:?}")).into());
    }
    let version = r.u16()?;
    if version != PROBE_VERSION {
        return Err(CorpusError::Format(format!("unsupported probe format version {version}")).into());
    }
    let layer = r.u16()?;
    let d_in = r.u32()? as usize;
    let d_out = r.u32()? as usize;
    let margin = r.f64()?;
    let count = d_in
        .checked_mul(d_out)
        .ok_or_else(|| CorpusError::Corrupt("weight count overflows".into()))?;
    let weights = r.f32s(count)?;
    let meta_len = r.u32()? as usize;
    let meta_bytes = r.take(meta_len)?;
    if r.remaining() != 0 {
        return Err(CorpusError::Corrupt(format!("{} trailing bytes", r.remaining())).into());
    }
    let meta: ProbeMeta = serde_json::from_slice(meta_bytes)
        .map_err(|e| CorpusError::Corrupt(format!("probe metadata: {e}")))?;
    let mut p = ProbeParams::new(layer, d_in, d_out, margin, weights).map_err(|e| match e {
        ProbeError::File(e) => e,
        other => CorpusError::Data(other.to_string()),
    })?;
    p.meta = meta;
    Ok(p)
}

pub fn write_probe_file(path: &Path, p: &ProbeParams) -> Result<()> {
    let bytes = encode_probe(p)?;
    fs::write(path, bytes).map_err(io_err(path))?;
    Ok(())
}

pub fn read_probe_file(path: &Path) -> Result<ProbeParams> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_probe(&bytes)
}
