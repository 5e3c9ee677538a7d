//! Vector-analogy evaluation: `d̂ = b − a + c`, averaged-distance ranking,
//! transfer matrices, forced choice and the same-word bound.

mod forced;
mod rank;
mod same_word;
mod transfer;
mod trials;

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingStore;

pub use forced::{forced_choice, preference_cdf, ForcedChoiceResult};
pub use rank::{predict_vectors, rank_target, Prediction, RankResult};
pub use same_word::{same_word_eval, SameWordOutcome, SameWordSummary};
pub use transfer::{
    allomorph_category, inflection_category, transfer_matrix, CellStat, TransferMatrix,
};
pub use trials::{layer_sweep, random_baseline, run_trials, LayerPoint, TrialOutcome};

#[derive(Debug, thiserror::Error)]
pub enum AnalogyError {
    #[error("word {0:?} has no rows in the store")]
    MissingWord(String),
    #[error("predicted vector has zero norm")]
    ZeroNorm,
    #[error("insufficient vocabulary: {0}")]
    InsufficientVocabulary(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T, E = AnalogyError> = std::result::Result<T, E>;

/// The stores an analogy reads its operands from.
///
/// With word pooling every operand and the candidate set come from one
/// store. With phoneme pooling the offset is taken within a single token,
/// `final(b) − constancy(b)`, added to `constancy(c)`, and ranked against
/// final-phoneme rows; the two stores are row-aligned.
#[derive(Clone, Copy, Debug)]
pub enum Views<'a> {
    Word(&'a EmbeddingStore),
    Phoneme {
        constancy: &'a EmbeddingStore,
        last: &'a EmbeddingStore,
    },
}

impl<'a> Views<'a> {
    pub fn phoneme(constancy: &'a EmbeddingStore, last: &'a EmbeddingStore) -> Result<Self> {
        let aligned = constancy.len() == last.len()
            && constancy.dim() == last.dim()
            && constancy
                .metas()
                .iter()
                .zip(last.metas())
                .all(|(a, b)| a.utterance_id == b.utterance_id && a.token_index == b.token_index);
        if !aligned {
            return Err(AnalogyError::Invalid("phoneme stores are not row-aligned".into()));
        }
        Ok(Views::Phoneme { constancy, last })
    }

    /// The store whose rows are ranked.
    pub fn ranking(&self) -> &'a EmbeddingStore {
        match self {
            Views::Word(s) => s,
            Views::Phoneme { last, .. } => last,
        }
    }

    pub fn rows(&self, word: &str) -> &'a [usize] {
        self.ranking().word_rows(word)
    }

    pub fn has(&self, word: &str) -> bool {
        !self.rows(word).is_empty()
    }
}

/// Evaluation settings shared by all analogy experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Token triples drawn per analogy.
    pub samples: usize,
    pub seed: u64,
    /// Also rank a random counterfactual source pair for every trial.
    pub baseline: bool,
    /// Deterministic cap on the number of trials per experiment.
    pub max_trials: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            samples: 20,
            seed: 0,
            baseline: false,
            max_trials: None,
        }
    }
}
