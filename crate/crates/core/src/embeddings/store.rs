use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmbedError, Result};
use crate::corpus_io::{io_err, CorpusError, Reader};

pub const STORE_MAGIC: &[u8; 4] = b"S3ME";
pub const STORE_VERSION: u16 = 1;

/// The token behind one store row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMeta {
    pub utterance_id: String,
    pub token_index: u32,
    pub word: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phoneme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<u32>,
}

impl RowMeta {
    pub fn word(utterance_id: &str, token_index: u32, word: &str) -> Self {
        RowMeta {
            utterance_id: utterance_id.to_string(),
            token_index,
            word: word.to_string(),
            phoneme: None,
            position: None,
        }
    }
}

/// Contiguous row-major matrix of token embeddings in one
/// (space, pooling) configuration, with per-row token metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    space: String,
    pooling: String,
    dim: usize,
    data: Vec<f32>,
    rows: Vec<RowMeta>,
    by_word: BTreeMap<String, Vec<usize>>,
    norms: Vec<f64>,
}

impl EmbeddingStore {
    pub fn new(space: &str, pooling: &str, dim: usize, data: Vec<f32>, rows: Vec<RowMeta>) -> Result<Self> {
        if dim == 0 {
            return Err(EmbedError::InvalidStore("dim 0".into()));
        }
        if data.len() != dim * rows.len() {
            return Err(EmbedError::InvalidStore(format!(
                "{} values for {} rows of dim {dim}",
                data.len(),
                rows.len()
            )));
        }
        for (i, r) in data.chunks_exact(dim).enumerate() {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(EmbedError::InvalidStore(format!("row {i} is not finite")));
            }
            if r.iter().all(|&v| v == 0.0) {
                return Err(EmbedError::InvalidStore(format!("row {i} is the zero vector")));
            }
        }
        let norms = data
            .chunks_exact(dim)
            .map(|r| r.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt())
            .collect();
        let mut by_word: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in rows.iter().enumerate() {
            by_word.entry(r.word.clone()).or_default().push(i);
        }
        Ok(EmbeddingStore {
            space: space.to_string(),
            pooling: pooling.to_string(),
            dim,
            data,
            rows,
            by_word,
            norms,
        })
    }

    pub fn space(&self) -> &str {
        &self.space
    }

    pub fn pooling(&self) -> &str {
        &self.pooling
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Euclidean norm of row `i`, computed in f64.
    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn meta(&self, i: usize) -> &RowMeta {
        &self.rows[i]
    }

    pub fn metas(&self) -> &[RowMeta] {
        &self.rows
    }

    /// Rows of one word type, ascending. Empty when the word is absent.
    pub fn word_rows(&self, word: &str) -> &[usize] {
        self.by_word.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.by_word.keys().map(String::as_str)
    }

    pub fn n_words(&self) -> usize {
        self.by_word.len()
    }

    /// A copy with every value multiplied by `c`.
    pub fn scaled(&self, c: f32) -> Result<Self> {
        let data = self.data.iter().map(|v| v * c).collect();
        Self::new(&self.space, &self.pooling, self.dim, data, self.rows.clone())
    }

    /// A copy keeping only `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        let mut rows = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.row(i));
            rows.push(self.rows[i].clone());
        }
        Self::new(&self.space, &self.pooling, self.dim, data, rows)
    }
}

#[derive(Serialize, Deserialize)]
struct Trailer {
    rows: Vec<RowMeta>,
}

fn short_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| EmbedError::InvalidStore(format!("tag too long: {s}")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

pub fn encode_store(s: &EmbeddingStore) -> Result<Vec<u8>> {
    let trailer = serde_json::to_vec(&Trailer { rows: s.rows.clone() })
        .map_err(|e| EmbedError::InvalidStore(e.to_string()))?;
    let mut out = Vec::with_capacity(32 + s.data.len() * 4 + trailer.len());
    out.extend_from_slice(STORE_MAGIC);
    out.extend_from_slice(&STORE_VERSION.to_le_bytes());
    short_str(&mut out, &s.space)?;
    short_str(&mut out, &s.pooling)?;
    out.extend_from_slice(&(s.dim as u32).to_le_bytes());
    out.extend_from_slice(&(s.rows.len() as u32).to_le_bytes());
    for v in &s.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(trailer.len() as u32).to_le_bytes());
    out.extend_from_slice(&trailer);
    Ok(out)
}

fn read_str(r: &mut Reader<'_>) -> Result<String> {
    let n = r.u16()? as usize;
    Ok(std::str::from_utf8(r.take(n)?)
        .map_err(|e| CorpusError::Format(format!("tag is not UTF-8: {e}")))?
        .to_string())
}

pub fn decode_store(bytes: &[u8]) -> Result<EmbeddingStore> {
    let mut r = Reader::new(bytes);
    let magic = r
        .take(4)
        .map_err(|_| CorpusError::Format("file too short for magic".into()))?;
    if magic != STORE_MAGIC {
        return Err(CorpusError::Format(format!("bad magic {magic:?}")).into());
    }
    let version = r.u16()?;
    if version != STORE_VERSION {
        return Err(CorpusError::Format(format!("unsupported store format version {version}")).into());
    }
    let space = read_str(&mut r)?;
    let pooling = read_str(&mut r)?;
    let dim = r.u32()? as usize;
    let n = r.u32()? as usize;
    let count = dim
        .checked_mul(n)
        .ok_or_else(|| CorpusError::Corrupt("row count × dim overflows".into()))?;
    let data = r.f32s(count)?;
    let len = r.u32()? as usize;
    let trailer = r.take(len)?;
    if r.remaining() != 0 {
        return Err(CorpusError::Corrupt(format!("{} trailing bytes", r.remaining())).into());
    }
    let t: Trailer = serde_json::from_slice(trailer)
        .map_err(|e| CorpusError::Corrupt(format!("store metadata: {e}")))?;
    if t.rows.len() != n {
        return Err(CorpusError::Corrupt(format!(
            "header declares {n} rows, metadata has {}",
            t.rows.len()
        ))
        .into());
    }
    EmbeddingStore::new(&space, &pooling, dim, data, t.rows)
}

pub fn write_store_file(path: &Path, s: &EmbeddingStore) -> Result<()> {
    let bytes = encode_store(s)?;
    fs::write(path, bytes).map_err(io_err(path))?;
    Ok(())
}

pub fn read_store_file(path: &Path) -> Result<EmbeddingStore> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_store(&bytes)
}
