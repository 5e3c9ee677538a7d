use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    classify_allomorph, io_err, Consistency, FeatureInventory, Inflection, InflectionPair, Lexeme,
    PhonForm, Result, StimuliError,
};

const FORCED_CHOICE: &str = include_str!("../../data/forced_choice.json");
const FALSE_FRIENDS: &str = include_str!("../../data/false_friends.json");
const REFERENCE_NOUNS: &str = include_str!("../../data/reference_nouns.txt");
const REFERENCE_VERBS: &str = include_str!("../../data/reference_verbs.txt");

/// Base forms of the reference unambiguous noun list.
pub fn reference_nouns() -> Vec<String> {
    REFERENCE_NOUNS.lines().map(str::to_string).filter(|s| !s.is_empty()).collect()
}

/// Base forms of the reference unambiguous verb list.
pub fn reference_verbs() -> Vec<String> {
    REFERENCE_VERBS.lines().map(str::to_string).filter(|s| !s.is_empty()).collect()
}

/// A phonemic form together with every orthographic spelling pooled under it
/// (homophones such as `maize`/`maze`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateForm {
    pub words: Vec<String>,
    pub form: PhonForm,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForcedChoiceTriple {
    pub base: CandidateForm,
    pub consistent: CandidateForm,
    pub inconsistent: CandidateForm,
}

impl ForcedChoiceTriple {
    pub fn label(&self) -> String {
        self.base.words.join("/")
    }

    pub fn validate(&self, inv: &FeatureInventory) -> std::result::Result<(), String> {
        for (name, cand, want) in [
            ("consistent", &self.consistent, Consistency::Consistent),
            ("inconsistent", &self.inconsistent, Consistency::Inconsistent),
        ] {
            if !self.base.form.is_proper_prefix_of(&cand.form) {
                return Err(format!(
                    "{}: base [{}] is not a prefix of {name} [{}]",
                    self.label(),
                    self.base.form,
                    cand.form
                ));
            }
            let got = classify_allomorph(&cand.form, inv)
                .map_err(|e| e.to_string())?
                .consistency;
            if got != want {
                return Err(format!(
                    "{}: {name} candidate [{}] classifies as {got:?}",
                    self.label(),
                    cand.form
                ));
            }
        }
        Ok(())
    }

    /// The same triple with candidate roles exchanged.
    pub fn swapped(&self) -> ForcedChoiceTriple {
        ForcedChoiceTriple {
            base: self.base.clone(),
            consistent: self.inconsistent.clone(),
            inconsistent: self.consistent.clone(),
        }
    }
}

#[derive(Deserialize)]
struct RawCandidate {
    words: Vec<String>,
    phonemes: String,
}

#[derive(Deserialize)]
struct RawTriple {
    base: RawCandidate,
    consistent: RawCandidate,
    inconsistent: RawCandidate,
}

#[derive(Deserialize)]
struct RawTriples {
    triples: Vec<RawTriple>,
}

fn candidate(raw: RawCandidate, inv: &FeatureInventory) -> Result<CandidateForm> {
    if raw.words.is_empty() {
        return Err(StimuliError::Material("candidate without spellings".into()));
    }
    Ok(CandidateForm {
        words: raw.words.iter().map(|w| w.to_lowercase()).collect(),
        form: PhonForm::parse(&raw.phonemes, inv)?,
    })
}

pub fn parse_forced_choice(text: &str, inv: &FeatureInventory) -> Result<Vec<ForcedChoiceTriple>> {
    let raw: RawTriples = serde_json::from_str(text)?;
    raw.triples
        .into_iter()
        .map(|t| {
            Ok(ForcedChoiceTriple {
                base: candidate(t.base, inv)?,
                consistent: candidate(t.consistent, inv)?,
                inconsistent: candidate(t.inconsistent, inv)?,
            })
        })
        .collect()
}

pub fn load_forced_choice(path: &Path, inv: &FeatureInventory) -> Result<Vec<ForcedChoiceTriple>> {
    parse_forced_choice(&std::fs::read_to_string(path).map_err(io_err(path))?, inv)
}

/// The 35 bundled forced-choice triples.
pub fn default_forced_choice(inv: &FeatureInventory) -> Result<Vec<ForcedChoiceTriple>> {
    parse_forced_choice(FORCED_CHOICE, inv)
}

#[derive(Deserialize)]
struct RawLexeme {
    word: String,
    phonemes: String,
}

#[derive(Deserialize)]
struct RawFfPair {
    base: RawLexeme,
    inflected: RawLexeme,
}

#[derive(Deserialize)]
struct RawFfPairs {
    pairs: Vec<RawFfPair>,
}

/// Parses false-friend pairs, rejecting any that do not look like a
/// rule-obeying inflection of their base.
pub fn parse_false_friends(text: &str, inv: &FeatureInventory) -> Result<Vec<InflectionPair>> {
    let raw: RawFfPairs = serde_json::from_str(text)?;
    raw.pairs
        .into_iter()
        .map(|p| {
            let lex = |r: RawLexeme| -> Result<Lexeme> {
                Ok(Lexeme {
                    word: r.word.to_lowercase(),
                    form: PhonForm::parse(&r.phonemes, inv)?,
                })
            };
            InflectionPair::new(lex(p.base)?, lex(p.inflected)?, Inflection::Ff, inv)
                .map_err(StimuliError::Material)
        })
        .collect()
}

pub fn load_false_friends(path: &Path, inv: &FeatureInventory) -> Result<Vec<InflectionPair>> {
    parse_false_friends(&std::fs::read_to_string(path).map_err(io_err(path))?, inv)
}

pub fn default_false_friends(inv: &FeatureInventory) -> Result<Vec<InflectionPair>> {
    parse_false_friends(FALSE_FRIENDS, inv)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MaterialCheck {
    pub item: String,
    pub ok: bool,
    pub detail: String,
}

/// Re-checks every forced-choice triple (and false-friend pair) against the
/// classifier; used by the `validate-stimuli` command.
pub fn validate_materials(
    triples: &[ForcedChoiceTriple],
    false_friends: &[InflectionPair],
    inv: &FeatureInventory,
) -> Vec<MaterialCheck> {
    let mut out: Vec<MaterialCheck> = triples
        .iter()
        .map(|t| match t.validate(inv) {
            Ok(()) => MaterialCheck {
                item: format!("forced-choice {}", t.label()),
                ok: true,
                detail: format!(
                    "{} [{}] consistent, {} [{}] inconsistent",
                    t.consistent.words.join("/"),
                    t.consistent.form,
                    t.inconsistent.words.join("/"),
                    t.inconsistent.form
                ),
            },
            Err(e) => MaterialCheck {
                item: format!("forced-choice {}", t.label()),
                ok: false,
                detail: e,
            },
        })
        .collect();
    for p in false_friends {
        let check = InflectionPair::new(p.base.clone(), p.inflected.clone(), Inflection::Ff, inv);
        out.push(MaterialCheck {
            item: format!("false-friend {}", p.label()),
            ok: check.is_ok(),
            detail: match check {
                Ok(q) => format!("[{}] false friend", q.allomorph),
                Err(e) => e,
            },
        });
    }
    out
}
