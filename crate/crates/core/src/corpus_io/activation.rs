use std::fs;
use std::path::Path;

use super::{io_err, CorpusError, Result};

pub const ACTIVATION_MAGIC: &[u8; 4] = b"S3MA";
pub const ACTIVATION_VERSION: u16 = 1;

/// Frame activations of one utterance at one layer, stored frame-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationMatrix {
    pub utterance_id: String,
    pub layer: u16,
    /// Frame hop in microseconds.
    pub hop_us: u32,
    dim: usize,
    frames: Vec<f32>,
}

impl ActivationMatrix {
    pub fn new(
        utterance_id: impl Into<String>,
        layer: u16,
        hop_us: u32,
        dim: usize,
        frames: Vec<f32>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(CorpusError::Data("activation dim must be positive".into()));
        }
        if hop_us == 0 {
            return Err(CorpusError::Data("frame hop must be positive".into()));
        }
        if !frames.len().is_multiple_of(dim) {
            return Err(CorpusError::Data(format!(
                "{} values is not a whole number of {dim}-dim frames",
                frames.len()
            )));
        }
        if let Some(i) = frames.iter().position(|v| !v.is_finite()) {
            return Err(CorpusError::Data(format!(
                "non-finite activation at frame {}, dim {}",
                i / dim,
                i % dim
            )));
        }
        Ok(ActivationMatrix {
            utterance_id: utterance_id.into(),
            layer,
            hop_us,
            dim,
            frames,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len() / self.dim
    }

    pub fn hop_ms(&self) -> f64 {
        self.hop_us as f64 / 1000.0
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.frames[t * self.dim..(t + 1) * self.dim]
    }

    /// Contiguous frames `range`, clamped to the matrix length.
    pub fn rows(&self, range: std::ops::Range<usize>) -> &[f32] {
        let end = range.end.min(self.n_frames());
        let start = range.start.min(end);
        &self.frames[start * self.dim..end * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.frames
    }
}

pub fn encode_activation(m: &ActivationMatrix) -> Result<Vec<u8>> {
    let id = m.utterance_id.as_bytes();
    let id_len = u16::try_from(id.len())
        .map_err(|_| CorpusError::Data("utterance id longer than 65535 bytes".into()))?;
    let dim = u32::try_from(m.dim).map_err(|_| CorpusError::Data("dim overflows u32".into()))?;
    let n = u32::try_from(m.n_frames())
        .map_err(|_| CorpusError::Data("frame count overflows u32".into()))?;

    let mut out = Vec::with_capacity(22 + id.len() + m.frames.len() * 4);
    out.extend_from_slice(ACTIVATION_MAGIC);
    out.extend_from_slice(&ACTIVATION_VERSION.to_le_bytes());
    out.extend_from_slice(&m.layer.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&m.hop_us.to_le_bytes());
    out.extend_from_slice(&id_len.to_le_bytes());
    out.extend_from_slice(id);
    for v in &m.frames {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Little-endian cursor over a byte buffer; running off the end is a
/// corruption error.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(CorpusError::Corrupt(format!(
                "truncated: wanted {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let bytes = count
            .checked_mul(4)
            .ok_or_else(|| CorpusError::Corrupt("payload size overflows".into()))?;
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn decode_activation(bytes: &[u8]) -> Result<ActivationMatrix> {
    let mut r = Reader::new(bytes);
    let magic = r
        .take(4)
        .map_err(|_| CorpusError::Format("file too short for magic".into()))?;
    if magic != ACTIVATION_MAGIC {
        return Err(CorpusError::Format(format!("bad magic {magic:?}")));
    }
    let version = r.u16()?;
    if version != ACTIVATION_VERSION {
        return Err(CorpusError::Format(format!(
            "unsupported activation format version {version}"
        )));
    }
    let layer = r.u16()?;
    let dim = r.u32()? as usize;
    let n = r.u32()? as usize;
    let hop_us = r.u32()?;
    let id_len = r.u16()? as usize;
    let id = std::str::from_utf8(r.take(id_len)?)
        .map_err(|e| CorpusError::Format(format!("utterance id is not UTF-8: {e}")))?
        .to_string();
    let count = n
        .checked_mul(dim)
        .ok_or_else(|| CorpusError::Corrupt("frame count × dim overflows".into()))?;
    let frames = r.f32s(count)?;
    if r.remaining() != 0 {
        return Err(CorpusError::Corrupt(format!(
            "{} trailing bytes after payload",
            r.remaining()
        )));
    }
    if dim == 0 {
        return Err(CorpusError::Format("header declares dim 0".into()));
    }
    ActivationMatrix::new(id, layer, hop_us, dim, frames)
}

pub fn write_activation_file(path: &Path, m: &ActivationMatrix) -> Result<()> {
    let bytes = encode_activation(m)?;
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_activation_file(path: &Path) -> Result<ActivationMatrix> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_activation(&bytes)
}
