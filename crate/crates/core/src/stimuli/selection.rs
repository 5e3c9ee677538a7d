use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    io_err, reference_nouns, reference_verbs, FeatureInventory, Inflection, InflectionPair,
    Lexeme, PhonForm, Result,
};
use crate::corpus_io::WordToken;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PosClass {
    Noun,
    Verb,
    Other,
}

/// Collapses a tag to noun/verb evidence: Penn `NN*` and universal
/// `NOUN` are nominal, `VB*` and `VERB` verbal, anything else is ignored.
pub fn pos_class(tag: &str) -> PosClass {
    let t = tag.trim().to_uppercase();
    if t.starts_with("NN") || t == "NOUN" {
        PosClass::Noun
    } else if t.starts_with("VB") || t == "VERB" {
        PosClass::Verb
    } else {
        PosClass::Other
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Homophone {
    pub word: String,
    pub homophone: String,
}

/// Hand-curated adjustments to the automatic selection.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Curation {
    /// Residual ambiguous types removed from both sets.
    #[serde(default)]
    pub exclude: Vec<String>,
    /// Forms homophonous with a monomorpheme; pairs containing them are dropped.
    #[serde(default)]
    pub homophones: Vec<Homophone>,
    /// When present, only these base forms may head a noun pair.
    #[serde(default)]
    pub noun_bases: Option<Vec<String>>,
    /// When present, only these base forms may head a verb pair.
    #[serde(default)]
    pub verb_bases: Option<Vec<String>>,
}

const DEFAULT_CURATION: &str = include_str!("../../data/curation.json");

impl Curation {
    /// Bundled exclusion and homophone lists, no base restriction.
    pub fn bundled() -> Self {
        serde_json::from_str(DEFAULT_CURATION).expect("bundled curation parses")
    }

    /// Bundled lists restricted to the reference noun and verb bases.
    pub fn reference() -> Self {
        Curation {
            noun_bases: Some(reference_nouns()),
            verb_bases: Some(reference_verbs()),
            ..Self::bundled()
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(
            &std::fs::read_to_string(path).map_err(io_err(path))?,
        )?)
    }

    fn is_homophone(&self, word: &str) -> bool {
        self.homophones.iter().any(|h| h.word == word)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UnambiguousSets {
    pub nouns: BTreeSet<String>,
    pub verbs: BTreeSet<String>,
}

/// Word types whose tagged instances are all nominal (resp. all verbal),
/// minus the curated exclusions.
pub fn select_unambiguous(tokens: &[WordToken], curation: &Curation) -> UnambiguousSets {
    if tokens.is_empty() {
        log::warn!("stimulus selection on an empty corpus");
        return UnambiguousSets::default();
    }
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for t in tokens {
        let e = counts.entry(t.word.to_lowercase()).or_default();
        match pos_class(&t.pos_tag) {
            PosClass::Noun => e.0 += 1,
            PosClass::Verb => e.1 += 1,
            PosClass::Other => {}
        }
    }
    let excluded: BTreeSet<String> = curation.exclude.iter().map(|w| w.to_lowercase()).collect();
    let mut sets = UnambiguousSets::default();
    for (word, (n, v)) in counts {
        if excluded.contains(&word) {
            continue;
        }
        if n > 0 && v == 0 {
            sets.nouns.insert(word);
        } else if v > 0 && n == 0 {
            sets.verbs.insert(word);
        }
    }
    sets
}

/// Word → phonemic form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lexicon {
    map: BTreeMap<String, PhonForm>,
}

impl Lexicon {
    /// Takes each word's most frequent aligned transcription (ties go to the
    /// lexicographically smallest). Tokens with unknown labels are ignored.
    pub fn from_tokens(tokens: &[WordToken], inv: &FeatureInventory) -> Self {
        let mut counts: HashMap<&str, BTreeMap<PhonForm, usize>> = HashMap::new();
        let mut bad = 0usize;
        for t in tokens.iter().filter(|t| !t.phonemes.is_empty()) {
            match PhonForm::from_labels(t.phonemes.iter().map(|p| p.label.as_str()), inv) {
                Ok(f) => *counts.entry(t.word.as_str()).or_default().entry(f).or_default() += 1,
                Err(_) => bad += 1,
            }
        }
        if bad > 0 {
            log::warn!("lexicon: ignored {bad} tokens with unknown phoneme labels");
        }
        let map = counts
            .into_iter()
            .map(|(w, forms)| {
                let best = forms
                    .into_iter()
                    .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                    .unwrap()
                    .0;
                (w.to_lowercase(), best)
            })
            .collect();
        Lexicon { map }
    }

    pub fn insert(&mut self, word: &str, form: PhonForm) {
        self.map.insert(word.to_lowercase(), form);
    }

    pub fn get(&self, word: &str) -> Option<&PhonForm> {
        self.map.get(word)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairBuild {
    pub pairs: Vec<InflectionPair>,
    /// `(base:inflected, reason)` for every candidate that was dropped.
    pub skipped: Vec<(String, String)>,
}

fn inflected_spellings(base: &str) -> Vec<String> {
    let mut v = vec![format!("{base}s"), format!("{base}es")];
    if let Some(stem) = base.strip_suffix('y') {
        if !stem.ends_with(['a', 'e', 'i', 'o', 'u']) {
            v.push(format!("{stem}ies"));
        }
    }
    v
}

/// Pairs each unambiguous base with its `-s`/`-es`/`-ies` form from the same
/// set, annotating inflection and allomorph.
pub fn build_pairs(
    sets: &UnambiguousSets,
    lexicon: &Lexicon,
    inv: &FeatureInventory,
    curation: &Curation,
) -> PairBuild {
    let mut out = PairBuild::default();
    for (set, inflection, allowed) in [
        (&sets.nouns, Inflection::Nns, &curation.noun_bases),
        (&sets.verbs, Inflection::Vbz, &curation.verb_bases),
    ] {
        let allowed: Option<BTreeSet<&str>> =
            allowed.as_ref().map(|v| v.iter().map(String::as_str).collect());
        for base in set {
            if allowed.as_ref().is_some_and(|a| !a.contains(base.as_str())) {
                continue;
            }
            let Some(inflected) = inflected_spellings(base).into_iter().find(|w| set.contains(w))
            else {
                continue;
            };
            let label = format!("{base}:{inflected}");
            if curation.is_homophone(base) || curation.is_homophone(&inflected) {
                out.skipped.push((label, "homophonous with a monomorpheme".into()));
                continue;
            }
            let (Some(bf), Some(inf)) = (lexicon.get(base), lexicon.get(&inflected)) else {
                let missing = if lexicon.get(base).is_none() { base } else { &inflected };
                log::info!("pair {label} skipped: no transcription for {missing}");
                out.skipped.push((label, format!("no transcription for {missing}")));
                continue;
            };
            let pair = InflectionPair::new(
                Lexeme { word: base.clone(), form: bf.clone() },
                Lexeme { word: inflected.clone(), form: inf.clone() },
                inflection,
                inv,
            );
            match pair {
                Ok(p) => out.pairs.push(p),
                Err(reason) => {
                    log::info!("pair {label} skipped: {reason}");
                    out.skipped.push((label, reason));
                }
            }
        }
    }
    out
}
