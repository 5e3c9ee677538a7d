//! Configuration-driven orchestration: train, embed, evaluate, report.
//!
//! Every command writes into one output directory guarded by a lock file
//! and leaves a `provenance.json` next to its products.

mod config;
mod evaluate;
mod report;
mod run;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{AnalogySettings, Overrides, Paths, PipelineConfig, PoolingSelection, SpaceSelection, Toggles};
pub use evaluate::{cmd_evaluate, EvaluateReport};
pub use report::{cmd_report, FIGURES};
pub use run::{cmd_embed, cmd_train, cmd_validate_stimuli, load_stimuli, Stimuli, StimulusReport};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus_io::CorpusError),
    #[error(transparent)]
    Stimuli(#[from] crate::stimuli::StimuliError),
    #[error(transparent)]
    Probe(#[from] crate::probe::ProbeError),
    #[error(transparent)]
    Embed(#[from] crate::embeddings::EmbedError),
    #[error(transparent)]
    Analogy(#[from] crate::analogy::AnalogyError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// 2 for configuration and validation problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Validation(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) => fs::create_dir_all(dir).map_err(io_err(dir)),
        None => Ok(()),
    }
}

pub(crate) fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, contents).map_err(io_err(path))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("value serialises");
    s.push('\n');
    write(path, s)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(it).expect("value serialises"));
        s.push('\n');
    }
    write(path, s)
}

/// Exclusive claim on an output directory, released on drop.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(out: &Path) -> Result<Self> {
        fs::create_dir_all(out).map_err(io_err(out))?;
        let path = out.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                use std::io::Write;
                let _ = writeln!(f, "{}", std::process::id());
                Ok(OutputLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(PipelineError::Locked(out.to_path_buf()))
            }
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// What a command consumed, enough to rerun it bit-exactly.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub command: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub stage_seeds: BTreeMap<String, u64>,
    pub inputs: Vec<InputDigest>,
}

pub(crate) fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Path as recorded in provenance: relative to `anchor` when possible so
/// records do not depend on where a tree was checked out.
fn display_path(path: &Path, anchor: &Path) -> String {
    path.strip_prefix(anchor)
        .map(|p| p.display().to_string())
        .unwrap_or_else(|_| path.display().to_string())
}

impl Provenance {
    pub(crate) fn new(command: &str, cfg: &PipelineConfig) -> Self {
        Provenance {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: cfg.digest(),
            seed: cfg.seed,
            stage_seeds: BTreeMap::new(),
            inputs: Vec::new(),
        }
    }

    pub(crate) fn seed(&mut self, label: &str, value: u64) {
        self.stage_seeds.insert(label.to_string(), value);
    }

    /// Records digests of `files`, named relative to the config directory
    /// or, for intermediate products, to the output directory.
    pub(crate) fn inputs(&mut self, cfg: &PipelineConfig, files: &[PathBuf]) -> Result<()> {
        let out = cfg.out_dir();
        for f in files {
            let path = if f.starts_with(&out) {
                format!("$out/{}", display_path(f, &out))
            } else {
                display_path(f, &cfg.base_dir)
            };
            if self.inputs.iter().any(|i| i.path == path) {
                continue;
            }
            self.inputs.push(InputDigest {
                path,
                sha256: sha256_file(f)?,
            });
        }
        Ok(())
    }

    pub(crate) fn write(&mut self, path: &Path) -> Result<()> {
        self.inputs.sort_by(|a, b| a.path.cmp(&b.path));
        write_json(path, self)
    }
}

pub fn probe_path(out: &Path, layer: u16) -> PathBuf {
    out.join(format!("probes/probe-layer-{layer}.s3mp"))
}

/// Store file for a space, layer and pooling tag (`:` becomes `-`).
pub fn store_path(out: &Path, space: crate::embeddings::Space, layer: u16, pooling: crate::embeddings::Pooling) -> PathBuf {
    out.join(format!(
        "stores/{}.{}.s3me",
        space.tag(layer),
        pooling.tag().replace(':', "-")
    ))
}
