//! Stimulus materials: phonological features, allomorph classification,
//! part-of-speech based selection of unambiguous nouns and verbs, and the
//! curated false-friend and forced-choice lists.

mod classify;
mod materials;
mod phon;
mod selection;

pub use classify::{classify_allomorph, AllomorphClass};
pub use materials::{
    default_false_friends, default_forced_choice, load_false_friends, load_forced_choice,
    parse_false_friends, parse_forced_choice, reference_nouns, reference_verbs,
    validate_materials, CandidateForm, ForcedChoiceTriple, MaterialCheck,
};
pub use phon::{Features, FeatureInventory, PhonForm};
pub use selection::{
    build_pairs, pos_class, select_unambiguous, Curation, Homophone, Lexicon, PairBuild,
    PosClass, UnambiguousSets,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum StimuliError {
    #[error("unknown phoneme label {0:?}")]
    UnknownPhoneme(String),
    #[error("empty phonemic form")]
    EmptyForm,
    #[error("feature inventory line {line}: {msg}")]
    Inventory { line: usize, msg: String },
    #[error("invalid material: {0}")]
    Material(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = StimuliError> = std::result::Result<T, E>;

/// Surface realisation of the word-final /-z/ morpheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Allomorph {
    #[serde(rename = "s")]
    S,
    #[serde(rename = "z")]
    Z,
    #[serde(rename = "Iz")]
    Iz,
}

impl Allomorph {
    pub const ALL: [Allomorph; 3] = [Allomorph::S, Allomorph::Z, Allomorph::Iz];

    pub fn label(self) -> &'static str {
        match self {
            Allomorph::S => "s",
            Allomorph::Z => "z",
            Allomorph::Iz => "Iz",
        }
    }

    /// Number of phonemes the suffix adds.
    pub fn suffix_len(self) -> usize {
        match self {
            Allomorph::Iz => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for Allomorph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Consistency {
    #[serde(rename = "consistent")]
    Consistent,
    #[serde(rename = "inconsistent")]
    Inconsistent,
    #[serde(rename = "n/a")]
    NotApplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Inflection {
    #[serde(rename = "NNS")]
    Nns,
    #[serde(rename = "VBZ")]
    Vbz,
    /// False friend: base + sibilant with no morphological relation.
    #[serde(rename = "FF")]
    Ff,
}

impl Inflection {
    pub fn label(self) -> &'static str {
        match self {
            Inflection::Nns => "NNS",
            Inflection::Vbz => "VBZ",
            Inflection::Ff => "FF",
        }
    }
}

impl std::fmt::Display for Inflection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// An orthographic word with its phonemic form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexeme {
    pub word: String,
    pub form: PhonForm,
}

/// A base/inflected pair differing by a word-final sibilant suffix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InflectionPair {
    pub base: Lexeme,
    pub inflected: Lexeme,
    pub inflection: Inflection,
    pub allomorph: Allomorph,
}

impl InflectionPair {
    /// Builds a pair, deriving the allomorph from the inflected form and
    /// checking that stripping it yields the base and that it obeys the
    /// distributional rules.
    pub fn new(
        base: Lexeme,
        inflected: Lexeme,
        inflection: Inflection,
        inventory: &FeatureInventory,
    ) -> std::result::Result<Self, String> {
        let class = classify_allomorph(&inflected.form, inventory).map_err(|e| e.to_string())?;
        let Some(allomorph) = class.allomorph else {
            return Err(format!("{} does not end in a sibilant suffix", inflected.word));
        };
        if class.consistency != Consistency::Consistent {
            return Err(format!(
                "{} ends in [{allomorph}] against the distributional rules",
                inflected.word
            ));
        }
        match inflected.form.strip_allomorph(allomorph) {
            Some(stem) if stem == base.form => {}
            _ => {
                return Err(format!(
                    "{} [{}] is not {} [{}] + [{allomorph}]",
                    inflected.word, inflected.form, base.word, base.form
                ))
            }
        }
        Ok(InflectionPair {
            base,
            inflected,
            inflection,
            allomorph,
        })
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.base.word, self.inflected.word)
    }
}

fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> StimuliError + '_ {
    move |source| StimuliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
