use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::rank::predict_rows;
use super::{rank_target, AnalogyError, EvalConfig, Result, Views};
use crate::seed::{derive, rng_from};
use crate::stimuli::{Inflection, InflectionPair};
use crate::Execution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SameWordOutcome {
    pub pair: String,
    pub inflection: Inflection,
    pub rank: usize,
    pub distance: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SameWordSummary {
    pub noun_mean: Option<f64>,
    pub verb_mean: Option<f64>,
    pub n_noun: usize,
    pub n_verb: usize,
    pub skipped: Vec<String>,
}

/// Splits each pair's base and inflected tokens into disjoint source and
/// target halves, predicts `b_src − a_src + a_tgt`, and ranks the target
/// half of the inflected word against the full store.
pub fn same_word_eval(
    pairs: &[InflectionPair],
    views: &Views<'_>,
    cfg: &EvalConfig,
    exec: Execution,
) -> Result<(Vec<SameWordOutcome>, SameWordSummary)> {
    let mut summary = SameWordSummary::default();
    let mut jobs = Vec::new();
    for p in pairs {
        let (ra, rb) = (views.rows(&p.base.word), views.rows(&p.inflected.word));
        if ra.len() < 2 || rb.len() < 2 {
            log::info!("same-word: {} has fewer than two tokens per form; skipped", p.label());
            summary.skipped.push(p.label());
            continue;
        }
        jobs.push(p);
    }
    let inner = if exec.is_parallel() { Execution::Sequential } else { exec };
    let results = exec.map_slice(&jobs, |p| -> Result<Option<SameWordOutcome>> {
        let seed = derive(cfg.seed, &format!("same-word/{}", p.label()));
        let mut rng = rng_from(seed);
        let mut ra = views.rows(&p.base.word).to_vec();
        let mut rb = views.rows(&p.inflected.word).to_vec();
        ra.shuffle(&mut rng);
        rb.shuffle(&mut rng);
        let (a_src, a_tgt) = ra.split_at(ra.len() / 2);
        let (b_src, b_tgt) = rb.split_at(rb.len() / 2);
        let pred = predict_rows(views, a_src, b_src, a_tgt, cfg.samples, &mut rng)?;
        let mut target = b_tgt.to_vec();
        target.sort_unstable();
        match rank_target(&pred, views.ranking(), &target, inner) {
            Ok(r) => Ok(Some(SameWordOutcome {
                pair: p.label(),
                inflection: p.inflection,
                rank: r.rank,
                distance: r.distance,
                seed,
            })),
            Err(AnalogyError::ZeroNorm) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut out = Vec::new();
    for r in results {
        if let Some(o) = r? {
            out.push(o);
        }
    }
    let ranks = |inf: Inflection| -> Vec<f64> {
        out.iter().filter(|o| o.inflection == inf).map(|o| o.rank as f64).collect()
    };
    let (n, v) = (ranks(Inflection::Nns), ranks(Inflection::Vbz));
    summary.noun_mean = super::transfer::mean(&n);
    summary.verb_mean = super::transfer::mean(&v);
    summary.n_noun = n.len();
    summary.n_verb = v.len();
    Ok((out, summary))
}
