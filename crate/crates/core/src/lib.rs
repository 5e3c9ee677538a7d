//! Contrastive word probes and vector-analogy evaluation over frame
//! activations of self-supervised speech models.
//!
//! The crate is organised along the pipeline:
//!
//! * [`corpus_io`]: activation, alignment, frequency and manifest formats,
//!   plus frame-to-span assignment.
//! * [`stimuli`]: allomorph classification, stimulus selection, curated lists.
//! * [`probe`]: the linear word probe, its hinge objective, AdamW training
//!   and mAP-based model selection.
//! * [`embeddings`]: pooled token embeddings, the embedding store and PCA.
//! * [`analogy`]: offset analogies, nearest-neighbour ranking and all the
//!   transfer, forced-choice and same-word evaluations.
//! * [`stats`]: categorical OLS, interaction strengths and Welch t-tests.
//! * [`pipeline`]: configuration-driven orchestration used by the CLI.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default). Every parallel reduction is ordered, so results are
//! bit-identical to the sequential path.

pub mod analogy;
pub mod corpus_io;
pub mod embeddings;
pub mod exec;
pub mod pipeline;
pub mod probe;
pub mod seed;
pub mod stats;
pub mod stimuli;
pub mod synth;

pub use exec::Execution;
