//! Pooled token embeddings, the embedding store, and PCA geometry.

mod build;
mod pca;
mod pool;
mod store;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use build::{build_phoneme_stores, build_store, StoreBuild};
pub use pca::{pca_project, PcaResult};
pub use pool::{pool_phoneme, pool_word, PhonemePoint, PooledPhoneme};
pub use store::{
    decode_store, encode_store, read_store_file, write_store_file, EmbeddingStore, RowMeta,
    STORE_MAGIC, STORE_VERSION,
};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("token {0} has no frames in its span")]
    Unusable(String),
    #[error("token {0} has no phoneme alignment")]
    NoPhonemes(String),
    #[error("pairing error: {0}")]
    Pairing(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid store: {0}")]
    InvalidStore(String),
    #[error("{0}")]
    Insufficient(String),
    #[error(transparent)]
    Probe(#[from] crate::probe::ProbeError),
    #[error(transparent)]
    File(#[from] crate::corpus_io::CorpusError),
}

pub type Result<T, E = EmbedError> = std::result::Result<T, E>;

/// Which representation the store rows live in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Raw,
    Probe,
}

impl Space {
    pub fn label(self) -> &'static str {
        match self {
            Space::Raw => "raw",
            Space::Probe => "probe",
        }
    }

    pub fn tag(self, layer: u16) -> String {
        format!("{}-layer-{layer}", self.label())
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// How a token's frames are pooled into one row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// Mean over the whole word span.
    Word,
    /// Mean over the constancy-point phoneme.
    Constancy,
    /// Mean over the word-final phoneme.
    Final,
}

impl Pooling {
    pub fn tag(self) -> &'static str {
        match self {
            Pooling::Word => "word",
            Pooling::Constancy => "phoneme:constancy",
            Pooling::Final => "phoneme:final",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        [Pooling::Word, Pooling::Constancy, Pooling::Final]
            .into_iter()
            .find(|p| p.tag() == tag)
    }
}

/// Mean of row-major `rows` in f64.
pub(crate) fn mean_rows(rows: &[f32], dim: usize) -> Vec<f64> {
    let n = rows.len() / dim;
    let mut acc = vec![0.0f64; dim];
    for r in rows.chunks_exact(dim) {
        for (a, &v) in acc.iter_mut().zip(r) {
            *a += v as f64;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    acc
}
