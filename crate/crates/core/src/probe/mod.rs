//! The linear word probe: `z = W x`, trained so frames of the same word
//! type are closer in cosine distance than frames of other types.

mod loss;
mod map;
mod optim;
mod params;
mod sampling;
mod search;
mod train;

pub use loss::{cosine_distance, cosine_similarity, hinge_loss, hinge_loss_grad, TripletGrad};
pub use map::{mean_average_precision, MapResult};
pub use optim::AdamW;
pub use params::{
    decode_probe, encode_probe, read_probe_file, write_probe_file, ProbeMeta, ProbeParams,
    PROBE_MAGIC, PROBE_VERSION,
};
pub use sampling::{sample_contrastive_batch, FramePool, Triple};
pub use search::{hyperparameter_search, CandidateResult, RandomSpace, SearchOutcome, SearchSpace};
pub use train::{projected_map, train_probe, untrained_probe, EpochLog, TrainConfig, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cosine undefined for a zero-norm vector")]
    ZeroNorm,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("splits share utterances: {0}")]
    OverlappingSplits(String),
    #[error("empty hyperparameter search space")]
    EmptySearchSpace,
    #[error("probe file: {0}")]
    File(#[from] crate::corpus_io::CorpusError),
}

pub type Result<T, E = ProbeError> = std::result::Result<T, E>;
