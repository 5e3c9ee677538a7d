use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    io_err, read_activation_file, read_alignments, ActivationMatrix, CorpusError, Result,
    WordToken,
};
use crate::exec::Execution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub utterance_id: String,
    pub activations: PathBuf,
    pub alignment_count: usize,
}

/// The set of utterances that make up one split at one layer.
///
/// Relative paths are resolved against the directory holding the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub split: String,
    pub layer: u16,
    pub alignments: PathBuf,
    pub utterances: Vec<ManifestEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl RunManifest {
    pub fn new(split: &str, layer: u16, alignments: PathBuf, utterances: Vec<ManifestEntry>) -> Self {
        RunManifest {
            split: split.to_string(),
            layer,
            alignments,
            utterances,
            base_dir: PathBuf::new(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CorpusError::Manifest(format!("{}: {e}", path.display())))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        fs::write(path, text + "\n").map_err(io_err(path))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Every file this manifest references, resolved.
    pub fn input_files(&self) -> Vec<PathBuf> {
        let mut v = vec![self.resolve(&self.alignments)];
        v.extend(self.utterances.iter().map(|u| self.resolve(&u.activations)));
        v
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for u in &self.utterances {
            if !ids.insert(u.utterance_id.as_str()) {
                return Err(CorpusError::Manifest(format!(
                    "duplicate utterance id {}",
                    u.utterance_id
                )));
            }
        }
        for p in self.input_files() {
            if !p.is_file() {
                return Err(CorpusError::Manifest(format!("missing file {}", p.display())));
            }
        }
        Ok(())
    }

    /// Reads and cross-checks every referenced file.
    pub fn load(&self) -> Result<Corpus> {
        self.validate()?;
        let all_tokens = read_alignments(&self.resolve(&self.alignments))?;
        let loaded = Execution::default().map_slice(&self.utterances, |u| {
            read_activation_file(&self.resolve(&u.activations))
        });
        let mut utterances = BTreeMap::new();
        let mut hop_us = None;
        let mut dim = None;
        for (entry, m) in self.utterances.iter().zip(loaded) {
            let m = m?;
            if m.utterance_id != entry.utterance_id {
                return Err(CorpusError::Manifest(format!(
                    "{} holds utterance {} but the manifest says {}",
                    entry.activations.display(),
                    m.utterance_id,
                    entry.utterance_id
                )));
            }
            if m.layer != self.layer {
                return Err(CorpusError::Manifest(format!(
                    "utterance {} is layer {}, manifest layer is {}",
                    m.utterance_id, m.layer, self.layer
                )));
            }
            if *hop_us.get_or_insert(m.hop_us) != m.hop_us {
                return Err(CorpusError::Manifest(format!(
                    "utterance {} has hop {} µs, run hop is {} µs",
                    m.utterance_id,
                    m.hop_us,
                    hop_us.unwrap()
                )));
            }
            if *dim.get_or_insert(m.dim()) != m.dim() {
                return Err(CorpusError::Manifest(format!(
                    "utterance {} has dim {}, run dim is {}",
                    m.utterance_id,
                    m.dim(),
                    dim.unwrap()
                )));
            }
            utterances.insert(m.utterance_id.clone(), m);
        }

        let mut tokens: Vec<WordToken> = all_tokens
            .into_iter()
            .filter(|t| utterances.contains_key(&t.utterance_id))
            .collect();
        tokens.sort_by(|a, b| {
            (a.utterance_id.as_str(), a.token_index).cmp(&(b.utterance_id.as_str(), b.token_index))
        });
        for entry in &self.utterances {
            let n = tokens
                .iter()
                .filter(|t| t.utterance_id == entry.utterance_id)
                .count();
            if n != entry.alignment_count {
                return Err(CorpusError::Manifest(format!(
                    "utterance {}: {} alignment records, manifest expects {}",
                    entry.utterance_id, n, entry.alignment_count
                )));
            }
        }
        Ok(Corpus {
            split: self.split.clone(),
            layer: self.layer,
            hop_us: hop_us.unwrap_or(20_000),
            dim: dim.unwrap_or(0),
            utterances,
            tokens,
        })
    }
}

/// A loaded split: activations keyed by utterance and tokens in canonical
/// `(utterance_id, token_index)` order.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub split: String,
    pub layer: u16,
    pub hop_us: u32,
    pub dim: usize,
    pub utterances: BTreeMap<String, ActivationMatrix>,
    pub tokens: Vec<WordToken>,
}

impl Corpus {
    pub fn from_parts(
        split: &str,
        layer: u16,
        mut activations: Vec<ActivationMatrix>,
        mut tokens: Vec<WordToken>,
    ) -> Result<Self> {
        super::validate_alignments(&tokens)?;
        let hop_us = activations.first().map(|m| m.hop_us).unwrap_or(20_000);
        let dim = activations.first().map(|m| m.dim()).unwrap_or(0);
        if activations.iter().any(|m| m.hop_us != hop_us || m.dim() != dim) {
            return Err(CorpusError::Data("mixed hop or dim across utterances".into()));
        }
        for t in tokens.iter_mut() {
            t.word = t.word.to_lowercase();
        }
        tokens.sort_by(|a, b| {
            (a.utterance_id.as_str(), a.token_index).cmp(&(b.utterance_id.as_str(), b.token_index))
        });
        let utterances = activations
            .drain(..)
            .map(|m| (m.utterance_id.clone(), m))
            .collect();
        Ok(Corpus {
            split: split.to_string(),
            layer,
            hop_us,
            dim,
            utterances,
            tokens,
        })
    }

    pub fn activations(&self, utterance_id: &str) -> Option<&ActivationMatrix> {
        self.utterances.get(utterance_id)
    }
}
