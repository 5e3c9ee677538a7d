//! On-disk formats for activations, alignments, frequencies and run
//! manifests, plus the frame-to-span assignment rule.

mod activation;
mod alignment;
mod frequency;
mod manifest;

use std::path::{Path, PathBuf};

pub use activation::{
    decode_activation, encode_activation, read_activation_file, write_activation_file,
    ActivationMatrix, ACTIVATION_MAGIC, ACTIVATION_VERSION,
};
pub use alignment::{
    assign_frames, parse_alignments, read_alignments, seconds_to_us, validate_alignments,
    write_alignments, FrameSpans, PhonemeSpan, WordToken,
};
pub(crate) use activation::Reader;
pub use frequency::FrequencyTable;
pub use manifest::{Corpus, ManifestEntry, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("alignment line {line}: {msg}")]
    Alignment { line: usize, msg: String },
    #[error("manifest error: {0}")]
    Manifest(String),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}
