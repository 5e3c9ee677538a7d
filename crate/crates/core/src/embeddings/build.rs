use std::collections::BTreeMap;

use super::{pool_phoneme, pool_word, EmbedError, EmbeddingStore, PhonemePoint, Pooling, Result, RowMeta, Space};
use crate::corpus_io::{Corpus, WordToken};
use crate::probe::ProbeParams;
use crate::stimuli::PhonForm;
use crate::Execution;

#[derive(Clone, Debug)]
pub struct StoreBuild {
    pub store: EmbeddingStore,
    /// `(token, reason)` for every token left out.
    pub skipped: Vec<(String, String)>,
}

fn check_probe(corpus: &Corpus, probe: Option<&ProbeParams>) -> Result<Space> {
    let Some(p) = probe else {
        return Ok(Space::Raw);
    };
    if p.d_in() != corpus.dim {
        return Err(EmbedError::DimensionMismatch {
            expected: corpus.dim,
            got: p.d_in(),
        });
    }
    if p.layer != corpus.layer {
        return Err(EmbedError::InvalidStore(format!(
            "probe trained on layer {} applied to layer {}",
            p.layer, corpus.layer
        )));
    }
    Ok(Space::Probe)
}

fn token_key(t: &WordToken) -> String {
    format!("{}#{}", t.utterance_id, t.token_index)
}

type Pooled = std::result::Result<(Vec<f32>, RowMeta), String>;

fn pool_one(
    corpus: &Corpus,
    t: &WordToken,
    pooling: Pooling,
    bases: &BTreeMap<String, PhonForm>,
    probe: Option<&ProbeParams>,
) -> Pooled {
    let m = corpus
        .activations(&t.utterance_id)
        .ok_or_else(|| "no activations for utterance".to_string())?;
    let meta = RowMeta::word(&t.utterance_id, t.token_index, &t.word);
    let (v, meta) = match pooling {
        Pooling::Word => (pool_word(m, t, probe).map_err(|e| e.to_string())?, meta),
        Pooling::Constancy | Pooling::Final => {
            let which = if pooling == Pooling::Constancy {
                PhonemePoint::Constancy
            } else {
                PhonemePoint::Final
            };
            let p = pool_phoneme(m, t, which, bases.get(&t.word), probe).map_err(|e| e.to_string())?;
            let meta = RowMeta {
                phoneme: Some(p.label),
                position: Some(p.position as u32),
                ..meta
            };
            (p.vector, meta)
        }
    };
    if v.iter().all(|&x| x == 0.0) {
        return Err("pooled to the zero vector".into());
    }
    Ok((v, meta))
}

fn assemble(
    corpus: &Corpus,
    probe: Option<&ProbeParams>,
    pooled: &[Vec<Pooled>],
    poolings: &[Pooling],
) -> Result<(Vec<EmbeddingStore>, Vec<(String, String)>)> {
    let space = check_probe(corpus, probe)?.tag(corpus.layer);
    let dim = probe.map(|p| p.d_out()).unwrap_or(corpus.dim);
    let mut data = vec![Vec::new(); poolings.len()];
    let mut rows = vec![Vec::new(); poolings.len()];
    let mut skipped = Vec::new();
    for (t, per) in corpus.tokens.iter().zip(pooled) {
        if let Some(reason) = per.iter().find_map(|p| p.as_ref().err()) {
            log::debug!("skipping token {}: {reason}", token_key(t));
            skipped.push((token_key(t), reason.clone()));
            continue;
        }
        for (k, p) in per.iter().enumerate() {
            let (v, m) = p.as_ref().unwrap();
            data[k].extend_from_slice(v);
            rows[k].push(m.clone());
        }
    }
    if !skipped.is_empty() {
        log::info!("{} of {} tokens skipped while pooling", skipped.len(), corpus.tokens.len());
    }
    let stores = poolings
        .iter()
        .zip(data.into_iter().zip(rows))
        .map(|(p, (d, r))| EmbeddingStore::new(&space, p.tag(), dim, d, r))
        .collect::<Result<Vec<_>>>()?;
    Ok((stores, skipped))
}

/// One row per usable token in canonical `(utterance_id, token_index)` order.
///
/// `bases` maps inflected words to their base forms and is only consulted
/// for constancy pooling.
pub fn build_store(
    corpus: &Corpus,
    probe: Option<&ProbeParams>,
    pooling: Pooling,
    bases: &BTreeMap<String, PhonForm>,
    exec: Execution,
) -> Result<StoreBuild> {
    check_probe(corpus, probe)?;
    let pooled = exec.map_slice(&corpus.tokens, |t| vec![pool_one(corpus, t, pooling, bases, probe)]);
    let (mut stores, skipped) = assemble(corpus, probe, &pooled, &[pooling])?;
    Ok(StoreBuild {
        store: stores.pop().unwrap(),
        skipped,
    })
}

/// Row-aligned constancy and final-phoneme stores: row `i` of both refers
/// to the same token, and a token is kept only if both poolings succeed.
pub fn build_phoneme_stores(
    corpus: &Corpus,
    probe: Option<&ProbeParams>,
    bases: &BTreeMap<String, PhonForm>,
    exec: Execution,
) -> Result<(EmbeddingStore, EmbeddingStore, Vec<(String, String)>)> {
    check_probe(corpus, probe)?;
    let both = [Pooling::Constancy, Pooling::Final];
    let pooled = exec.map_slice(&corpus.tokens, |t| {
        both.iter().map(|&p| pool_one(corpus, t, p, bases, probe)).collect()
    });
    let (mut stores, skipped) = assemble(corpus, probe, &pooled, &both)?;
    let fin = stores.pop().unwrap();
    let con = stores.pop().unwrap();
    Ok((con, fin, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_io::{ActivationMatrix, PhonemeSpan};
    use crate::stimuli::FeatureInventory;

    fn tok(utt: &str, idx: u32, word: &str, phones: &[&str], on: f64) -> WordToken {
        WordToken {
            utterance_id: utt.into(),
            token_index: idx,
            word: word.into(),
            pos_tag: "NN".into(),
            onset_s: on,
            offset_s: on + 0.04 * phones.len() as f64,
            phonemes: phones
                .iter()
                .enumerate()
                .map(|(i, l)| PhonemeSpan {
                    label: l.to_string(),
                    onset_s: on + 0.04 * i as f64,
                    offset_s: on + 0.04 * (i + 1) as f64,
                })
                .collect(),
        }
    }

    fn corpus(order: &[usize]) -> Corpus {
        let acts: Vec<ActivationMatrix> = ["u1", "u2"]
            .iter()
            .enumerate()
            .map(|(k, id)| {
                let f = (0..40 * 3).map(|i| ((i + 7 * k) as f32 * 0.13).cos() + 1.5).collect();
                ActivationMatrix::new(id.to_string(), 4, 20_000, 3, f).unwrap()
            })
            .collect();
        let toks = vec![
            tok("u1", 0, "cat", &["K", "AE", "T"], 0.0),
            tok("u1", 1, "cats", &["K", "AE", "T", "S"], 0.2),
            tok("u1", 2, "dog", &["D", "AO", "G"], 0.4),
            tok("u2", 0, "cats", &["K", "AE", "T", "S"], 0.0),
            tok("u2", 1, "dog", &["D", "AO", "G"], 0.3),
            // beyond the end of the activations: unusable
            tok("u2", 2, "cat", &["K", "AE", "T"], 5.0),
        ];
        let toks = order.iter().map(|&i| toks[i].clone()).collect();
        Corpus::from_parts("train", 4, acts, toks).unwrap()
    }

    #[test]
    fn canonical_rows_and_skips() {
        let a = build_store(&corpus(&[0, 1, 2, 3, 4, 5]), None, Pooling::Word, &BTreeMap::new(), Execution::Parallel).unwrap();
        assert_eq!(a.store.len(), 5);
        assert_eq!(a.skipped.len(), 1);
        assert_eq!(a.store.space(), "raw-layer-4");
        let b = build_store(&corpus(&[5, 3, 1, 4, 0, 2]), None, Pooling::Word, &BTreeMap::new(), Execution::Sequential).unwrap();
        assert_eq!(a.store, b.store);
    }

    #[test]
    fn selector_probe_truncates() {
        let c = corpus(&[0, 1, 2, 3, 4]);
        let p = ProbeParams::new(4, 3, 2, 0.5, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let raw = build_store(&c, None, Pooling::Word, &BTreeMap::new(), Execution::Parallel).unwrap().store;
        let pr = build_store(&c, Some(&p), Pooling::Word, &BTreeMap::new(), Execution::Parallel).unwrap().store;
        assert_eq!(pr.space(), "probe-layer-4");
        for i in 0..raw.len() {
            assert_eq!(&raw.row(i)[..2], pr.row(i));
        }
        let wrong_layer = ProbeParams::new(5, 3, 2, 0.5, vec![1.0; 6]).unwrap();
        assert!(build_store(&c, Some(&wrong_layer), Pooling::Word, &BTreeMap::new(), Execution::Parallel).is_err());
    }

    #[test]
    fn phoneme_stores_are_aligned() {
        let c = corpus(&[0, 1, 2, 3, 4, 5]);
        let inv = FeatureInventory::default();
        let bases = BTreeMap::from([("cats".to_string(), PhonForm::parse("K AE T", &inv).unwrap())]);
        let (con, fin, skipped) = build_phoneme_stores(&c, None, &bases, Execution::Parallel).unwrap();
        assert_eq!(con.len(), fin.len());
        assert_eq!(skipped.len(), 1);
        for i in 0..con.len() {
            assert_eq!(con.meta(i).utterance_id, fin.meta(i).utterance_id);
        }
        let cats = con.word_rows("cats")[0];
        assert_eq!(con.meta(cats).phoneme.as_deref(), Some("T"));
        assert_eq!(fin.meta(cats).phoneme.as_deref(), Some("S"));
        let cat = con.word_rows("cat")[0];
        assert_eq!(con.meta(cat).phoneme.as_deref(), Some("T"));
    }
}
