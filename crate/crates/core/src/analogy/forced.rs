use serde::{Deserialize, Serialize};

use super::rank::{predict_rows, Prediction};
use super::trials::usable;
use super::{AnalogyError, EvalConfig, Result, Views};
use crate::embeddings::EmbeddingStore;
use crate::seed::{derive, rng_from};
use crate::stimuli::{ForcedChoiceTriple, InflectionPair};
use crate::Execution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllomorphPreference {
    pub allomorph: String,
    pub draws: usize,
    pub preference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcedChoiceResult {
    pub triple: String,
    pub consistent: Vec<String>,
    pub inconsistent: Vec<String>,
    pub draws: usize,
    pub consistent_choices: usize,
    /// Fraction of draws choosing the consistent form.
    pub preference: f64,
    /// The same split by the source pair's allomorph.
    pub by_source_allomorph: Vec<AllomorphPreference>,
}

fn rows_of(views: &Views<'_>, words: &[String]) -> Vec<usize> {
    let mut r: Vec<usize> = words.iter().flat_map(|w| views.rows(w).iter().copied()).collect();
    r.sort_unstable();
    r.dedup();
    r
}

/// Nearest row to `v` among `rows`: `(distance, row)`, lower row on ties.
fn nearest(store: &EmbeddingStore, rows: &[usize], v: &[f64]) -> (f64, usize) {
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut best = (f64::INFINITY, usize::MAX);
    for &r in rows {
        let x = store.row(r);
        let dot: f64 = x.iter().zip(v).map(|(&a, b)| a as f64 * b).sum();
        let d = 1.0 - dot / (store.norm(r) * nv);
        if (d, r) < best {
            best = (d, r);
        }
    }
    best
}

/// `true` when the draw picks the consistent candidate.
fn choose(store: &EmbeddingStore, cons: &[usize], incons: &[usize], v: &[f64]) -> bool {
    nearest(store, cons, v) < nearest(store, incons, v)
}

fn count(pred: &Prediction, store: &EmbeddingStore, cons: &[usize], incons: &[usize]) -> Result<usize> {
    let mut n = 0;
    for s in 0..pred.samples() {
        let v = pred.vector(s);
        if v.iter().all(|&x| x == 0.0) {
            return Err(AnalogyError::ZeroNorm);
        }
        n += choose(store, cons, incons, v) as usize;
    }
    Ok(n)
}

/// Maps every real source pair's offset onto each triple's base and
/// records how often the nearest candidate token belongs to the consistent
/// form. Triples lacking tokens for any form are skipped and named in the
/// second return value.
pub fn forced_choice(
    sources: &[InflectionPair],
    triples: &[ForcedChoiceTriple],
    views: &Views<'_>,
    cfg: &EvalConfig,
    exec: Execution,
) -> Result<(Vec<ForcedChoiceResult>, Vec<String>)> {
    let sources = usable(sources, views);
    let store = views.ranking();
    let mut skipped = Vec::new();
    let mut jobs = Vec::new();
    for t in triples {
        let (base, cons, incons) = (
            rows_of(views, &t.base.words),
            rows_of(views, &t.consistent.words),
            rows_of(views, &t.inconsistent.words),
        );
        if base.is_empty() || cons.is_empty() || incons.is_empty() {
            log::info!("forced-choice triple {} lacks tokens; skipped", t.label());
            skipped.push(t.label());
            continue;
        }
        jobs.push((t, base, cons, incons));
    }
    let results = exec.map_slice(&jobs, |(t, base, cons, incons)| -> Result<ForcedChoiceResult> {
        let mut by: Vec<(String, usize, usize)> = Vec::new();
        let (mut draws, mut wins) = (0, 0);
        for s in &sources {
            let seed = derive(cfg.seed, &format!("forced-choice/{}->{}", s.label(), t.label()));
            let mut rng = rng_from(seed);
            let pred = predict_rows(
                views,
                views.rows(&s.base.word),
                views.rows(&s.inflected.word),
                base,
                cfg.samples,
                &mut rng,
            )?;
            let n = match count(&pred, store, cons, incons) {
                Ok(n) => n,
                Err(AnalogyError::ZeroNorm) => continue,
                Err(e) => return Err(e),
            };
            draws += pred.samples();
            wins += n;
            let label = s.allomorph.label().to_string();
            match by.iter_mut().find(|(a, _, _)| *a == label) {
                Some(e) => {
                    e.1 += pred.samples();
                    e.2 += n;
                }
                None => by.push((label, pred.samples(), n)),
            }
        }
        by.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(ForcedChoiceResult {
            triple: t.label(),
            consistent: t.consistent.words.clone(),
            inconsistent: t.inconsistent.words.clone(),
            draws,
            consistent_choices: wins,
            preference: if draws > 0 { wins as f64 / draws as f64 } else { f64::NAN },
            by_source_allomorph: by
                .into_iter()
                .map(|(allomorph, d, w)| AllomorphPreference {
                    allomorph,
                    draws: d,
                    preference: w as f64 / d as f64,
                })
                .collect(),
        })
    });
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        let r = r?;
        if r.draws > 0 {
            out.push(r);
        } else {
            skipped.push(r.triple);
        }
    }
    Ok((out, skipped))
}

/// Empirical CDF of preferences: `(value, fraction of triples ≤ value)` at
/// each distinct value.
pub fn preference_cdf(prefs: &[f64]) -> Vec<(f64, f64)> {
    let mut s: Vec<f64> = prefs.iter().copied().filter(|p| p.is_finite()).collect();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in s.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => out.push((v, frac)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_steps() {
        let c = preference_cdf(&[1.0, 0.5, 1.0, 0.25]);
        assert_eq!(c, vec![(0.25, 0.25), (0.5, 0.5), (1.0, 1.0)]);
        assert!(preference_cdf(&[]).is_empty());
    }
}
