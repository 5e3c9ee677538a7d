use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{projected_map, train_probe, FramePool, ProbeError, Result, TrainConfig, TrainOutcome};
use crate::Execution;

/// Grid over the tuned hyperparameters; other fields come from a base config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub d_out: Vec<usize>,
    pub margin: Vec<f64>,
    pub learning_rate: Vec<f64>,
    pub weight_decay: Vec<f64>,
}

impl SearchSpace {
    /// Cartesian product in `d_out, margin, learning_rate, weight_decay` order.
    pub fn grid(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &d_out in &self.d_out {
            for &margin in &self.margin {
                for &learning_rate in &self.learning_rate {
                    for &weight_decay in &self.weight_decay {
                        out.push(TrainConfig {
                            d_out,
                            margin,
                            learning_rate,
                            weight_decay,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

/// Random search ranges; rates are drawn log-uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpace {
    pub d_out: Vec<usize>,
    pub margin: (f64, f64),
    pub learning_rate: (f64, f64),
    pub weight_decay: (f64, f64),
}

impl RandomSpace {
    pub fn sample<R: Rng>(&self, budget: usize, base: &TrainConfig, rng: &mut R) -> Vec<TrainConfig> {
        let log_uniform = |(lo, hi): (f64, f64), rng: &mut R| {
            if lo >= hi {
                lo
            } else {
                rng.random_range(lo.ln()..hi.ln()).exp()
            }
        };
        if self.d_out.is_empty() {
            return Vec::new();
        }
        (0..budget)
            .map(|_| {
                let d_out = self.d_out[rng.random_range(0..self.d_out.len())];
                let (mlo, mhi) = self.margin;
                let margin = if mlo >= mhi { mlo } else { rng.random_range(mlo..mhi) };
                let learning_rate = log_uniform(self.learning_rate, rng);
                let weight_decay = log_uniform(self.weight_decay, rng);
                TrainConfig {
                    d_out,
                    margin,
                    learning_rate,
                    weight_decay,
                    ..base.clone()
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub config: TrainConfig,
    pub selection_map: f64,
    pub validation_loss: f64,
    pub epochs_run: usize,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best_index: usize,
    pub best: TrainOutcome,
    pub candidates: Vec<CandidateResult>,
}

/// Trains every candidate on `train` (early-stopping on `early_stop`) and
/// picks the one with the highest mAP on `selection`. Ties go to lower
/// validation loss, then to the earlier candidate.
pub fn hyperparameter_search(
    candidates: &[TrainConfig],
    train: &FramePool,
    early_stop: &FramePool,
    selection: &FramePool,
    layer: u16,
    exec: Execution,
) -> Result<SearchOutcome> {
    if candidates.is_empty() {
        return Err(ProbeError::EmptySearchSpace);
    }
    for (a, b) in [(train, selection), (early_stop, selection)] {
        if let Some(u) = a.utterances().intersection(b.utterances()).next() {
            return Err(ProbeError::OverlappingSplits(u.clone()));
        }
    }
    let runs = exec.map_slice(candidates, |cfg| -> Result<(TrainOutcome, f64)> {
        let out = train_probe(train, early_stop, layer, cfg, exec)?;
        let m = projected_map(&out.params, selection, cfg.map_max_frames, exec)?;
        Ok((out, m.map))
    });
    let mut outcomes = Vec::with_capacity(runs.len());
    for r in runs {
        outcomes.push(r?);
    }
    let mut best_index = 0;
    for (i, (o, m)) in outcomes.iter().enumerate().skip(1) {
        let (bo, bm) = &outcomes[best_index];
        let better = *m > *bm
            || (*m == *bm && o.params.meta.final_validation_loss < bo.params.meta.final_validation_loss);
        if better {
            best_index = i;
        }
    }
    let candidates_out = outcomes
        .iter()
        .zip(candidates)
        .map(|((o, m), c)| CandidateResult {
            config: c.clone(),
            selection_map: *m,
            validation_loss: o.params.meta.final_validation_loss,
            epochs_run: o.params.meta.epochs_run,
        })
        .collect();
    let best = outcomes.swap_remove(best_index).0;
    Ok(SearchOutcome {
        best_index,
        best,
        candidates: candidates_out,
    })
}
