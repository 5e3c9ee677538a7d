use super::{mean_rows, EmbedError, Result};
use crate::corpus_io::{assign_frames, ActivationMatrix, WordToken};
use crate::probe::ProbeParams;
use crate::stimuli::{FeatureInventory, PhonForm};

fn token_name(t: &WordToken) -> String {
    format!("{}#{} ({})", t.utterance_id, t.token_index, t.word)
}

fn finish(mean: Vec<f64>, probe: Option<&ProbeParams>) -> Result<Vec<f32>> {
    match probe {
        Some(p) => {
            if mean.len() != p.d_in() {
                return Err(EmbedError::DimensionMismatch {
                    expected: p.d_in(),
                    got: mean.len(),
                });
            }
            Ok(p.project_f64(&mean))
        }
        None => Ok(mean.iter().map(|&v| v as f32).collect()),
    }
}

/// Mean of the frames in the token's word span, in raw or probe space.
///
/// Probe-space pooling projects the raw mean; the projection is linear, so
/// this equals the mean of projected frames.
pub fn pool_word(m: &ActivationMatrix, token: &WordToken, probe: Option<&ProbeParams>) -> Result<Vec<f32>> {
    let span = assign_frames(token, m.hop_us).word;
    let rows = m.rows(span);
    if rows.is_empty() {
        return Err(EmbedError::Unusable(token_name(token)));
    }
    finish(mean_rows(rows, m.dim()), probe)
}

/// Which phoneme a phoneme-level embedding is pooled over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhonemePoint {
    /// The last phoneme shared with the base form: position `|base| - 1`.
    /// Without a base the token is its own base and this is its last phoneme.
    Constancy,
    /// The word-final phoneme.
    Final,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PooledPhoneme {
    pub vector: Vec<f32>,
    pub label: String,
    pub position: usize,
}

/// Mean of the frames spanning one phoneme of the token.
///
/// `base` is the base form when the token is the inflected member of a pair;
/// its labels must be a proper prefix of the token's phoneme labels.
pub fn pool_phoneme(
    m: &ActivationMatrix,
    token: &WordToken,
    which: PhonemePoint,
    base: Option<&PhonForm>,
    probe: Option<&ProbeParams>,
) -> Result<PooledPhoneme> {
    if token.phonemes.is_empty() {
        return Err(EmbedError::NoPhonemes(token_name(token)));
    }
    let labels: Vec<String> = token
        .phonemes
        .iter()
        .map(|p| FeatureInventory::normalize(&p.label))
        .collect();
    let position = match (which, base) {
        (PhonemePoint::Final, _) | (PhonemePoint::Constancy, None) => labels.len() - 1,
        (PhonemePoint::Constancy, Some(b)) => {
            let proper = b.len() < labels.len() && b.labels().iter().zip(&labels).all(|(x, y)| x == y);
            if !proper || b.is_empty() {
                return Err(EmbedError::Pairing(format!(
                    "base [{b}] is not a proper prefix of {} [{}]",
                    token.word,
                    labels.join(" ")
                )));
            }
            b.len() - 1
        }
    };
    let spans = assign_frames(token, m.hop_us);
    let rows = m.rows(spans.phonemes[position].clone());
    if rows.is_empty() {
        return Err(EmbedError::Unusable(format!(
            "{} phoneme {position}",
            token_name(token)
        )));
    }
    Ok(PooledPhoneme {
        vector: finish(mean_rows(rows, m.dim()), probe)?,
        label: labels[position].clone(),
        position,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_io::PhonemeSpan;

    fn token(phones: &[&str], dur: f64) -> WordToken {
        WordToken {
            utterance_id: "u".into(),
            token_index: 0,
            word: "w".into(),
            pos_tag: "NNS".into(),
            onset_s: 0.0,
            offset_s: dur * phones.len() as f64,
            phonemes: phones
                .iter()
                .enumerate()
                .map(|(i, l)| PhonemeSpan {
                    label: l.to_string(),
                    onset_s: i as f64 * dur,
                    offset_s: (i + 1) as f64 * dur,
                })
                .collect(),
        }
    }

    fn matrix(frames: Vec<f32>, dim: usize) -> ActivationMatrix {
        ActivationMatrix::new("u".to_string(), 0, 20_000, dim, frames).unwrap()
    }

    #[test]
    fn word_means() {
        let m = matrix(vec![0.0, 2.0, 2.0, 0.0], 2);
        let t = token(&["K", "AE"], 0.02);
        assert_eq!(pool_word(&m, &t, None).unwrap(), vec![1.0, 1.0]);
        let empty = token(&[], 0.0);
        let short = WordToken { offset_s: 0.005, ..empty };
        assert!(matches!(pool_word(&m, &short, None), Err(EmbedError::Unusable(_))));
    }

    #[test]
    fn pooling_commutes_with_projection() {
        let frames: Vec<f32> = (0..15).map(|i| (i as f32 * 0.37).sin()).collect();
        let m = matrix(frames.clone(), 3);
        let t = token(&["K", "AE", "T", "S", "IH"], 0.02);
        let p = ProbeParams::new(0, 3, 2, 0.5, vec![0.5, -1.0, 2.0, 0.25, 0.0, -0.75]).unwrap();
        let pooled = pool_word(&m, &t, Some(&p)).unwrap();
        let proj = p.project_frames(&frames).unwrap();
        let mut want = [0.0f64; 2];
        for r in proj.chunks_exact(2) {
            want[0] += r[0] as f64 / 5.0;
            want[1] += r[1] as f64 / 5.0;
        }
        for (a, b) in pooled.iter().zip(want) {
            assert!((*a as f64 - b).abs() <= 1e-6 * b.abs().max(1.0));
        }
    }

    #[test]
    fn constancy_and_final_of_shirts() {
        // SH ER T S, two frames per phoneme
        let frames: Vec<f32> = (0..8).map(|i| i as f32).collect();
        let m = matrix(frames, 1);
        let t = token(&["SH", "ER1", "T", "S"], 0.04);
        let inv = FeatureInventory::default();
        let base = PhonForm::parse("SH ER T", &inv).unwrap();
        let c = pool_phoneme(&m, &t, PhonemePoint::Constancy, Some(&base), None).unwrap();
        assert_eq!((c.label.as_str(), c.position, c.vector[0]), ("T", 2, 4.5));
        let f = pool_phoneme(&m, &t, PhonemePoint::Final, Some(&base), None).unwrap();
        assert_eq!((f.label.as_str(), f.position, f.vector[0]), ("S", 3, 6.5));
    }

    #[test]
    fn duplicated_final_phoneme_uses_position() {
        // "cheeses": CH IY Z IH Z, base CH IY Z -> constancy is index 2
        let m = matrix((0..5).map(|i| i as f32).collect(), 1);
        let t = token(&["CH", "IY", "Z", "IH", "Z"], 0.02);
        let inv = FeatureInventory::default();
        let base = PhonForm::parse("CH IY Z", &inv).unwrap();
        let c = pool_phoneme(&m, &t, PhonemePoint::Constancy, Some(&base), None).unwrap();
        assert_eq!((c.position, c.vector[0]), (2, 2.0));
        let f = pool_phoneme(&m, &t, PhonemePoint::Final, None, None).unwrap();
        assert_eq!((f.position, f.vector[0]), (4, 4.0));
    }

    #[test]
    fn pairing_and_alignment_errors() {
        let m = matrix(vec![1.0; 4], 1);
        let inv = FeatureInventory::default();
        let t = token(&["K", "AE", "T", "S"], 0.02);
        let wrong = PhonForm::parse("D AO G", &inv).unwrap();
        assert!(matches!(
            pool_phoneme(&m, &t, PhonemePoint::Constancy, Some(&wrong), None),
            Err(EmbedError::Pairing(_))
        ));
        let same = PhonForm::parse("K AE T S", &inv).unwrap();
        assert!(pool_phoneme(&m, &t, PhonemePoint::Constancy, Some(&same), None).is_err());
        let bare = WordToken { phonemes: vec![], ..t };
        assert!(matches!(
            pool_phoneme(&m, &bare, PhonemePoint::Final, None, None),
            Err(EmbedError::NoPhonemes(_))
        ));
    }
}
