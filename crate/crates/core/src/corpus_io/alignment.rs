use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, CorpusError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhonemeSpan {
    pub label: String,
    pub onset_s: f64,
    pub offset_s: f64,
}

/// One aligned spoken word.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordToken {
    pub utterance_id: String,
    pub token_index: u32,
    pub word: String,
    pub pos_tag: String,
    pub onset_s: f64,
    pub offset_s: f64,
    #[serde(default)]
    pub phonemes: Vec<PhonemeSpan>,
}

// Boundaries exported as decimal seconds pick up representation noise.
const TIME_EPS: f64 = 1e-9;

impl WordToken {
    /// Checks the span invariants of a single token.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.onset_s.is_finite() && self.offset_s.is_finite()) {
            return Err("non-finite word time".into());
        }
        if self.onset_s < 0.0 {
            return Err(format!("negative onset {}", self.onset_s));
        }
        if self.onset_s >= self.offset_s {
            return Err(format!(
                "onset {} not before offset {}",
                self.onset_s, self.offset_s
            ));
        }
        let mut prev_end = self.onset_s;
        for (i, p) in self.phonemes.iter().enumerate() {
            if !(p.onset_s.is_finite() && p.offset_s.is_finite()) || p.onset_s >= p.offset_s {
                return Err(format!("phoneme {i} ({}) has an invalid span", p.label));
            }
            if p.onset_s < prev_end - TIME_EPS {
                return Err(format!("phoneme {i} ({}) overlaps or is out of order", p.label));
            }
            if p.offset_s > self.offset_s + TIME_EPS {
                return Err(format!("phoneme {i} ({}) extends past the word", p.label));
            }
            prev_end = p.offset_s;
        }
        Ok(())
    }

    pub fn phoneme_labels(&self) -> Vec<String> {
        self.phonemes.iter().map(|p| p.label.clone()).collect()
    }
}

/// Frame index ranges assigned to a word and to each of its phonemes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameSpans {
    pub word: Range<usize>,
    pub phonemes: Vec<Range<usize>>,
}

impl FrameSpans {
    pub fn is_usable(&self) -> bool {
        !self.word.is_empty()
    }
}

pub fn seconds_to_us(s: f64) -> i64 {
    (s * 1e6).round() as i64
}

fn ceil_div(a: i64, b: i64) -> i64 {
    let q = a.div_euclid(b);
    if a.rem_euclid(b) == 0 {
        q
    } else {
        q + 1
    }
}

/// Frames whose centre `(t + 0.5) * hop` lies in `[onset, offset)`.
///
/// Computed in integer microseconds so boundaries on exact frame centres
/// are decided without rounding error.
fn span_frames(onset_us: i64, offset_us: i64, hop_us: i64) -> Range<usize> {
    // (2t + 1) * hop >= 2 * x  <=>  t >= (2x - hop) / (2 hop)
    let first = |x: i64| ceil_div(2 * x - hop_us, 2 * hop_us).max(0) as usize;
    let start = first(onset_us);
    let end = first(offset_us).max(start);
    start..end
}

pub fn assign_frames(token: &WordToken, hop_us: u32) -> FrameSpans {
    assert!(hop_us > 0, "frame hop must be positive");
    let hop = hop_us as i64;
    let word = span_frames(seconds_to_us(token.onset_s), seconds_to_us(token.offset_s), hop);
    let phonemes = token
        .phonemes
        .iter()
        .map(|p| span_frames(seconds_to_us(p.onset_s), seconds_to_us(p.offset_s), hop))
        .collect();
    FrameSpans { word, phonemes }
}

/// Parses JSON Lines alignments, lowercasing words and validating spans.
pub fn parse_alignments(text: &str) -> Result<Vec<WordToken>> {
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tok: WordToken =
            serde_json::from_str(line).map_err(|e| CorpusError::Alignment {
                line: i + 1,
                msg: e.to_string(),
            })?;
        tok.word = tok.word.to_lowercase();
        tok.validate()
            .map_err(|msg| CorpusError::Alignment { line: i + 1, msg })?;
        tokens.push(tok);
    }
    validate_alignments(&tokens)?;
    Ok(tokens)
}

pub fn read_alignments(path: &Path) -> Result<Vec<WordToken>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_alignments(&text)
}

pub fn write_alignments(path: &Path, tokens: &[WordToken]) -> Result<()> {
    let mut out = Vec::new();
    for t in tokens {
        serde_json::to_writer(&mut out, t).expect("token serialises");
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&out).map_err(io_err(path))
}

/// Cross-token checks: unique token indices and non-overlapping word spans
/// within each utterance.
pub fn validate_alignments(tokens: &[WordToken]) -> Result<()> {
    let mut by_utt: HashMap<&str, Vec<&WordToken>> = HashMap::new();
    for t in tokens {
        by_utt.entry(t.utterance_id.as_str()).or_default().push(t);
    }
    for (utt, mut toks) in by_utt {
        let mut seen = HashSet::new();
        for t in &toks {
            if !seen.insert(t.token_index) {
                return Err(CorpusError::Data(format!(
                    "utterance {utt}: duplicate token index {}",
                    t.token_index
                )));
            }
        }
        toks.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
        for w in toks.windows(2) {
            if w[1].onset_s < w[0].offset_s - TIME_EPS {
                return Err(CorpusError::Data(format!(
                    "utterance {utt}: tokens {} and {} overlap",
                    w[0].token_index, w[1].token_index
                )));
            }
        }
    }
    Ok(())
}
