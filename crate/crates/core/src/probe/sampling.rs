use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use rand::Rng;

use super::{ProbeError, Result};
use crate::corpus_io::{assign_frames, Corpus};

/// Word-span frames of one split, grouped by token and word type.
///
/// Frames are stored row-major; `tokens[k]` is the frame range of token
/// `k`, and `token_type[k]` indexes into `types`.
#[derive(Clone, Debug)]
pub struct FramePool {
    pub dim: usize,
    frames: Vec<f32>,
    types: Vec<String>,
    tokens: Vec<Range<usize>>,
    token_type: Vec<usize>,
    utterances: BTreeSet<String>,
}

impl FramePool {
    /// Collects frames of every token whose word span covers at least one frame.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut groups: BTreeMap<String, Vec<Vec<f32>>> = BTreeMap::new();
        for tok in &corpus.tokens {
            let Some(m) = corpus.activations(&tok.utterance_id) else {
                continue;
            };
            let span = assign_frames(tok, corpus.hop_us).word;
            let rows = m.rows(span);
            if rows.is_empty() {
                continue;
            }
            groups.entry(tok.word.clone()).or_default().push(rows.to_vec());
        }
        let mut pool = Self::from_groups(corpus.dim, groups);
        pool.utterances = corpus.utterances.keys().cloned().collect();
        pool
    }

    /// Builds a pool from `word -> [token frames (row-major)]`.
    pub fn from_groups<I>(dim: usize, groups: I) -> Self
    where
        I: IntoIterator<Item = (String, Vec<Vec<f32>>)>,
    {
        let mut pool = FramePool {
            dim,
            frames: Vec::new(),
            types: Vec::new(),
            tokens: Vec::new(),
            token_type: Vec::new(),
            utterances: BTreeSet::new(),
        };
        for (word, toks) in groups {
            let ty = pool.types.len();
            pool.types.push(word);
            for f in toks {
                assert!(dim > 0 && f.len() % dim == 0, "token frames not a multiple of dim");
                if f.is_empty() {
                    continue;
                }
                let start = pool.frames.len() / dim;
                pool.frames.extend_from_slice(&f);
                pool.tokens.push(start..pool.frames.len() / dim);
                pool.token_type.push(ty);
            }
        }
        pool
    }

    pub fn with_utterances(mut self, ids: impl IntoIterator<Item = String>) -> Self {
        self.utterances = ids.into_iter().collect();
        self
    }

    pub fn utterances(&self) -> &BTreeSet<String> {
        &self.utterances
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len() / self.dim.max(1)
    }

    pub fn n_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn type_name(&self, ty: usize) -> &str {
        &self.types[ty]
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        &self.frames[i * self.dim..(i + 1) * self.dim]
    }

    pub fn frames(&self) -> &[f32] {
        &self.frames
    }

    pub fn token_frames(&self, k: usize) -> Range<usize> {
        self.tokens[k].clone()
    }

    pub fn token_type(&self, k: usize) -> usize {
        self.token_type[k]
    }

    /// Per-frame `(type, token)` labels.
    pub fn frame_labels(&self) -> (Vec<u32>, Vec<u32>) {
        let mut ty = Vec::with_capacity(self.n_frames());
        let mut tok = Vec::with_capacity(self.n_frames());
        for (k, r) in self.tokens.iter().enumerate() {
            for _ in r.clone() {
                ty.push(self.token_type[k] as u32);
                tok.push(k as u32);
            }
        }
        (ty, tok)
    }

    /// Keeps every `stride`-th token (starting at 0) so that at most
    /// `max_frames` frames remain. Deterministic.
    pub fn thinned(&self, max_frames: usize) -> FramePool {
        if self.n_frames() <= max_frames {
            return self.clone();
        }
        let stride = self.n_frames().div_ceil(max_frames.max(1));
        let mut groups: BTreeMap<usize, Vec<Vec<f32>>> = BTreeMap::new();
        for k in (0..self.tokens.len()).step_by(stride) {
            let r = &self.tokens[k];
            groups
                .entry(self.token_type[k])
                .or_default()
                .push(self.frames[r.start * self.dim..r.end * self.dim].to_vec());
        }
        let named = groups.into_iter().map(|(t, v)| (self.types[t].clone(), v));
        FramePool::from_groups(self.dim, named).with_utterances(self.utterances.iter().cloned())
    }
}

/// Frame indices of one training triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triple {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Precomputed sampling tables for a pool.
pub(crate) struct Sampler<'a> {
    pool: &'a FramePool,
    /// tokens of each type
    by_type: Vec<Vec<usize>>,
    /// types with at least two tokens, with cumulative ordered-pair counts
    eligible: Vec<usize>,
    cum_pairs: Vec<u64>,
}

impl<'a> Sampler<'a> {
    pub(crate) fn new(pool: &'a FramePool) -> Result<Self> {
        let mut by_type = vec![Vec::new(); pool.n_types()];
        for k in 0..pool.n_tokens() {
            by_type[pool.token_type[k]].push(k);
        }
        let mut eligible = Vec::new();
        let mut cum_pairs = Vec::new();
        let mut acc = 0u64;
        for (t, toks) in by_type.iter().enumerate() {
            let n = toks.len() as u64;
            if n >= 2 {
                acc += n * (n - 1);
                eligible.push(t);
                cum_pairs.push(acc);
            }
        }
        if eligible.is_empty() {
            return Err(ProbeError::InsufficientData(
                "no word type has two tokens to form a positive pair".into(),
            ));
        }
        if by_type.iter().filter(|t| !t.is_empty()).count() < 2 {
            return Err(ProbeError::InsufficientData(
                "need at least two word types for negatives".into(),
            ));
        }
        Ok(Sampler {
            pool,
            by_type,
            eligible,
            cum_pairs,
        })
    }

    fn frame_in<R: Rng>(&self, token: usize, rng: &mut R) -> usize {
        let r = &self.pool.tokens[token];
        rng.random_range(r.clone())
    }

    fn negative<R: Rng>(&self, ty: usize, rng: &mut R) -> usize {
        loop {
            let k = rng.random_range(0..self.pool.n_tokens());
            if self.pool.token_type[k] != ty {
                return self.frame_in(k, rng);
            }
        }
    }

    /// One anchor draw: a uniformly chosen ordered token pair of one type,
    /// then `per_anchor` triples sharing the anchor frame. Extra triples
    /// redraw the positive token among the anchor's type.
    pub(crate) fn draw<R: Rng>(&self, per_anchor: usize, rng: &mut R, out: &mut Vec<Triple>) {
        let total = *self.cum_pairs.last().unwrap();
        let r = rng.random_range(0..total);
        let slot = self.cum_pairs.partition_point(|&c| c <= r);
        let ty = self.eligible[slot];
        let local = r - if slot == 0 { 0 } else { self.cum_pairs[slot - 1] };
        let toks = &self.by_type[ty];
        let k = toks.len() as u64;
        let i = (local / (k - 1)) as usize;
        let mut j = (local % (k - 1)) as usize;
        if j >= i {
            j += 1;
        }
        let anchor = self.frame_in(toks[i], rng);
        for n in 0..per_anchor {
            if n > 0 {
                j = rng.random_range(0..toks.len() - 1);
                if j >= i {
                    j += 1;
                }
            }
            let positive = self.frame_in(toks[j], rng);
            let negative = self.negative(ty, rng);
            out.push(Triple {
                anchor,
                positive,
                negative,
            });
        }
    }
}

/// Draws `n_anchors × per_anchor` triples from `pool`.
///
/// Anchor/positive token pairs are uniform over ordered pairs of distinct
/// tokens of the same type; frames are uniform within each token; the
/// negative is a uniformly chosen token of another type.
pub fn sample_contrastive_batch<R: Rng>(
    pool: &FramePool,
    n_anchors: usize,
    per_anchor: usize,
    rng: &mut R,
) -> Result<Vec<Triple>> {
    let s = Sampler::new(pool)?;
    let mut out = Vec::with_capacity(n_anchors * per_anchor);
    for _ in 0..n_anchors {
        s.draw(per_anchor, rng, &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    fn pool() -> FramePool {
        let tok = |v: f32, n: usize| vec![v; n * 2];
        FramePool::from_groups(
            2,
            vec![
                ("a".to_string(), vec![tok(1.0, 2), tok(2.0, 3)]),
                ("b".to_string(), vec![tok(3.0, 1), tok(4.0, 1), tok(5.0, 2)]),
                ("c".to_string(), vec![tok(6.0, 4)]),
            ],
        )
    }

    #[test]
    fn triples_respect_labels() {
        let p = pool();
        let (ty, tok) = p.frame_labels();
        let mut rng = rng_from(1);
        let ts = sample_contrastive_batch(&p, 500, 2, &mut rng).unwrap();
        assert_eq!(ts.len(), 1000);
        for t in ts {
            assert_eq!(ty[t.anchor], ty[t.positive]);
            assert_ne!(tok[t.anchor], tok[t.positive]);
            assert_ne!(ty[t.anchor], ty[t.negative]);
            // singleton type never anchors
            assert_ne!(p.type_name(ty[t.anchor] as usize), "c");
        }
    }

    #[test]
    fn ordered_pairs_are_uniform() {
        // a has 2 ordered pairs, b has 6: anchors from b should be ~3/4
        let p = pool();
        let (ty, _) = p.frame_labels();
        let mut rng = rng_from(2);
        let ts = sample_contrastive_batch(&p, 8000, 1, &mut rng).unwrap();
        let b = ts.iter().filter(|t| ty[t.anchor] == 1).count() as f64 / 8000.0;
        assert!((b - 0.75).abs() < 0.03, "{b}");
    }

    #[test]
    fn sampling_is_seeded() {
        let p = pool();
        let a = sample_contrastive_batch(&p, 50, 1, &mut rng_from(9)).unwrap();
        let b = sample_contrastive_batch(&p, 50, 1, &mut rng_from(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn needs_pairs_and_negatives() {
        let single = FramePool::from_groups(1, vec![("a".to_string(), vec![vec![1.0], vec![2.0]])]);
        assert!(sample_contrastive_batch(&single, 1, 1, &mut rng_from(0)).is_err());
        let no_pairs = FramePool::from_groups(
            1,
            vec![("a".to_string(), vec![vec![1.0]]), ("b".to_string(), vec![vec![2.0]])],
        );
        assert!(sample_contrastive_batch(&no_pairs, 1, 1, &mut rng_from(0)).is_err());
    }

    #[test]
    fn thinning_keeps_labels_consistent() {
        let p = pool().thinned(6);
        assert!(p.n_frames() <= 6 + 4);
        let (ty, tok) = p.frame_labels();
        assert_eq!(ty.len(), p.n_frames());
        assert_eq!(tok.len(), p.n_frames());
    }
}
