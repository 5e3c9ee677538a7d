use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{predict_vectors, rank_target, AnalogyError, EvalConfig, RankResult, Result, Views};
use crate::seed::{derive, rng_from, stage_rng};
use crate::stimuli::{Allomorph, Inflection, InflectionPair};
use crate::Execution;

/// One `(a, b) :: (c, d)` evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub source: String,
    pub target: String,
    pub inflection_from: Inflection,
    pub inflection_to: Inflection,
    pub allomorph_from: Allomorph,
    pub allomorph_to: Allomorph,
    pub rank: usize,
    pub distance: f64,
    pub target_row: usize,
    pub rows: usize,
    pub samples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_rank: Option<usize>,
}

impl TrialOutcome {
    /// Inflected word of the source pair.
    pub fn source_word(&self) -> &str {
        self.source.split_once(':').map(|(_, w)| w).unwrap_or(&self.source)
    }

    pub fn target_word(&self) -> &str {
        self.target.split_once(':').map(|(_, w)| w).unwrap_or(&self.target)
    }
}

pub(crate) fn usable<'p>(pairs: &'p [InflectionPair], views: &Views<'_>) -> Vec<&'p InflectionPair> {
    pairs
        .iter()
        .filter(|p| {
            let ok = views.has(&p.base.word) && views.has(&p.inflected.word);
            if !ok {
                log::info!("pair {} has no tokens in the store; skipped", p.label());
            }
            ok
        })
        .collect()
}

/// Keeps at most `cap` of `n` items, chosen by a seeded shuffle and
/// returned in ascending order.
pub(crate) fn capped(n: usize, cap: Option<usize>, seed: u64, label: &str) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if let Some(cap) = cap.filter(|&c| c < n) {
        let mut rng = stage_rng(seed, label);
        for i in (1..n).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        idx.truncate(cap);
        idx.sort_unstable();
    }
    idx
}

/// Ranks `d` after replacing the source pair with a uniformly drawn pair of
/// distinct word types.
pub fn random_baseline<R: Rng>(
    views: &Views<'_>,
    c: &str,
    d: &str,
    samples: usize,
    rng: &mut R,
    exec: Execution,
) -> Result<RankResult> {
    let words: Vec<&str> = views.ranking().words().collect();
    if words.len() < 2 {
        return Err(AnalogyError::InsufficientVocabulary(format!(
            "{} word types, need 2",
            words.len()
        )));
    }
    let a = rng.random_range(0..words.len());
    let mut b = rng.random_range(0..words.len() - 1);
    if b >= a {
        b += 1;
    }
    let pred = predict_vectors(views, words[a], words[b], c, samples, rng)?;
    let target = views.rows(d);
    rank_target(&pred, views.ranking(), target, exec)
}

/// Every ordered pair of distinct usable pairs, one trial each.
pub fn run_trials(
    pairs: &[InflectionPair],
    views: &Views<'_>,
    cfg: &EvalConfig,
    exec: Execution,
) -> Result<Vec<TrialOutcome>> {
    let pairs = usable(pairs, views);
    let mut jobs = Vec::new();
    for s in &pairs {
        for t in &pairs {
            if s.label() != t.label() {
                jobs.push((*s, *t));
            }
        }
    }
    let keep = capped(jobs.len(), cfg.max_trials, cfg.seed, "analogy/trial-cap");
    let jobs: Vec<_> = keep.into_iter().map(|i| jobs[i]).collect();
    let inner = if exec.is_parallel() { Execution::Sequential } else { exec };
    let results = exec.map_slice(&jobs, |(s, t)| -> Result<Option<TrialOutcome>> {
        let seed = derive(cfg.seed, &format!("analogy/{}->{}", s.label(), t.label()));
        let mut rng = rng_from(seed);
        let pred = predict_vectors(views, &s.base.word, &s.inflected.word, &t.base.word, cfg.samples, &mut rng)?;
        let r = match rank_target(&pred, views.ranking(), views.rows(&t.inflected.word), inner) {
            Ok(r) => r,
            Err(AnalogyError::ZeroNorm) => {
                log::warn!("trial {} -> {}: zero predicted vector, skipped", s.label(), t.label());
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        let baseline_rank = if cfg.baseline {
            let mut brng = stage_rng(seed, "baseline");
            match random_baseline(views, &t.base.word, &t.inflected.word, cfg.samples, &mut brng, inner) {
                Ok(b) => Some(b.rank),
                Err(AnalogyError::ZeroNorm) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        Ok(Some(TrialOutcome {
            source: s.label(),
            target: t.label(),
            inflection_from: s.inflection,
            inflection_to: t.inflection,
            allomorph_from: s.allomorph,
            allomorph_to: t.allomorph,
            rank: r.rank,
            distance: r.distance,
            target_row: r.row,
            rows: views.ranking().len(),
            samples: cfg.samples,
            seed,
            baseline_rank,
        }))
    });
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        if let Some(t) = r? {
            out.push(t);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerPoint {
    pub layer: u16,
    pub n_trials: usize,
    pub mean_rank: Option<f64>,
    pub median_rank: Option<f64>,
}

/// Mean rank of the full morphology trial set at each layer.
pub fn layer_sweep(
    per_layer: &[(u16, Views<'_>)],
    pairs: &[InflectionPair],
    cfg: &EvalConfig,
    exec: Execution,
) -> Result<Vec<LayerPoint>> {
    let mut out = Vec::with_capacity(per_layer.len());
    for (layer, views) in per_layer {
        let trials = run_trials(pairs, views, cfg, exec)?;
        let ranks: Vec<f64> = trials.iter().map(|t| t.rank as f64).collect();
        out.push(LayerPoint {
            layer: *layer,
            n_trials: ranks.len(),
            mean_rank: super::transfer::mean(&ranks),
            median_rank: super::transfer::median(&ranks),
        });
    }
    Ok(out)
}
