use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{triplet_forward_backward, Scratch};
use super::sampling::Sampler;
use super::{mean_average_precision, AdamW, FramePool, MapResult, ProbeError, ProbeParams, Result, Triple};
use crate::seed::{derive, rng_from};
use crate::Execution;

/// Triples per gradient chunk. Chunks are reduced in index order so the
/// summed gradient does not depend on thread count.
const CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub d_out: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Anchors per optimizer step.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Positive/negative draws per anchor.
    pub triples_per_anchor: usize,
    /// Anchors per epoch; defaults to the number of training tokens.
    pub anchors_per_epoch: Option<usize>,
    /// Size of the fixed validation triple set.
    pub validation_triples: usize,
    /// Frame budget for mAP evaluation.
    pub map_max_frames: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d_out: 32,
            margin: 0.37590,
            learning_rate: 0.00108,
            weight_decay: 0.00607,
            batch_size: 256,
            max_epochs: 50,
            patience: 5,
            triples_per_anchor: 1,
            anchors_per_epoch: None,
            validation_triples: 2048,
            map_max_frames: 2000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, d_in: usize) -> Result<()> {
        let bad = |m: String| Err(ProbeError::InvalidConfig(m));
        if self.d_out == 0 || self.d_out >= d_in {
            return bad(format!("d_out {} must be in 1..{d_in}", self.d_out));
        }
        if !(self.margin > 0.0 && self.margin < 2.0) {
            return bad(format!("margin {} outside (0, 2)", self.margin));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay {}", self.weight_decay));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch size, max epochs and patience must be positive".into());
        }
        if self.triples_per_anchor == 0 || self.validation_triples == 0 {
            return bad("triples per anchor and validation triples must be positive".into());
        }
        if self.anchors_per_epoch == Some(0) {
            return bad("anchors per epoch must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean training loss over the epoch; `None` for the initial evaluation.
    pub train_loss: Option<f64>,
    pub validation_loss: f64,
    pub best: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters at the best validation epoch.
    pub params: ProbeParams,
    pub log: Vec<EpochLog>,
}

/// Glorot-uniform initial weights, `±sqrt(6 / (d_in + d_out))`.
pub(crate) fn init_weights<R: Rng>(d_in: usize, d_out: usize, rng: &mut R) -> Vec<f64> {
    let a = (6.0 / (d_in + d_out) as f64).sqrt();
    (0..d_in * d_out).map(|_| rng.random_range(-a..a)).collect()
}

/// The probe before any training step, from the same initial draw that
/// `train_probe` starts from.
pub fn untrained_probe(layer: u16, d_in: usize, cfg: &TrainConfig) -> Result<ProbeParams> {
    cfg.validate(d_in)?;
    let w = init_weights(d_in, cfg.d_out, &mut rng_from(derive(cfg.seed, "probe/init")));
    to_params(layer, d_in, cfg, &w)
}

fn to_params(layer: u16, d_in: usize, cfg: &TrainConfig, w: &[f64]) -> Result<ProbeParams> {
    ProbeParams::new(layer, d_in, cfg.d_out, cfg.margin, w.iter().map(|&v| v as f32).collect())
}

fn chunk_ranges(n: usize) -> Vec<std::ops::Range<usize>> {
    (0..n.div_ceil(CHUNK)).map(|c| c * CHUNK..((c + 1) * CHUNK).min(n)).collect()
}

/// Mean loss and (when `with_grad`) mean gradient over `triples`.
fn batch_loss(
    w: &[f64],
    d_in: usize,
    d_out: usize,
    pool: &FramePool,
    triples: &[Triple],
    margin: f64,
    with_grad: bool,
    exec: Execution,
) -> Result<(f64, Option<Vec<f64>>)> {
    let ranges = chunk_ranges(triples.len());
    let parts = exec.map_slice(&ranges, |r| -> Result<(f64, Option<Vec<f64>>)> {
        let mut scratch = Scratch::new(d_out);
        let mut g = with_grad.then(|| vec![0.0; w.len()]);
        let mut sum = 0.0;
        for t in &triples[r.clone()] {
            sum += triplet_forward_backward(
                w,
                d_in,
                pool.frame(t.anchor),
                pool.frame(t.positive),
                pool.frame(t.negative),
                margin,
                &mut scratch,
                g.as_deref_mut().map(|g| (g, 1.0)),
            )?;
        }
        Ok((sum, g))
    });
    let mut total = 0.0;
    let mut grad = with_grad.then(|| vec![0.0; w.len()]);
    for p in parts {
        let (s, g) = p?;
        total += s;
        if let (Some(acc), Some(g)) = (grad.as_mut(), g) {
            acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
    }
    let n = triples.len().max(1) as f64;
    if let Some(g) = grad.as_mut() {
        g.iter_mut().for_each(|v| *v /= n);
    }
    Ok((total / n, grad))
}

/// Trains a probe with AdamW on contrastive triples, evaluating a fixed
/// validation triple set after every epoch and keeping the best weights.
pub fn train_probe(
    train: &FramePool,
    validation: &FramePool,
    layer: u16,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<TrainOutcome> {
    let d_in = train.dim;
    cfg.validate(d_in)?;
    if validation.dim != d_in {
        return Err(ProbeError::DimensionMismatch {
            expected: d_in,
            got: validation.dim,
        });
    }
    if let Some(u) = train.utterances().intersection(validation.utterances()).next() {
        return Err(ProbeError::OverlappingSplits(u.clone()));
    }
    let d_out = cfg.d_out;
    let sampler = Sampler::new(train)?;
    let mut val_triples = Vec::new();
    {
        let vs = Sampler::new(validation)?;
        let mut rng = rng_from(derive(cfg.seed, "probe/validation"));
        while val_triples.len() < cfg.validation_triples {
            vs.draw(1, &mut rng, &mut val_triples);
        }
    }
    let mut w = init_weights(d_in, d_out, &mut rng_from(derive(cfg.seed, "probe/init")));
    let mut opt = AdamW::new(w.len(), cfg.learning_rate, cfg.weight_decay);
    let mut rng = rng_from(derive(cfg.seed, "probe/batches"));

    let val = |w: &[f64]| batch_loss(w, d_in, d_out, validation, &val_triples, cfg.margin, false, exec);
    let mut best_loss = val(&w)?.0;
    let mut best_w = w.clone();
    let mut best_epoch = 0;
    let mut log = vec![EpochLog {
        epoch: 0,
        train_loss: None,
        validation_loss: best_loss,
        best: true,
    }];
    let anchors = cfg.anchors_per_epoch.unwrap_or(train.n_tokens());
    let steps = anchors.div_ceil(cfg.batch_size);
    let mut stale = 0;
    let mut batch = Vec::with_capacity(cfg.batch_size * cfg.triples_per_anchor);
    for epoch in 1..=cfg.max_epochs {
        let mut epoch_loss = 0.0;
        for s in 0..steps {
            let n = cfg.batch_size.min(anchors - s * cfg.batch_size);
            batch.clear();
            for _ in 0..n {
                sampler.draw(cfg.triples_per_anchor, &mut rng, &mut batch);
            }
            let (loss, grad) = batch_loss(&w, d_in, d_out, train, &batch, cfg.margin, true, exec)?;
            epoch_loss += loss * n as f64;
            opt.step(&mut w, &grad.unwrap());
        }
        let train_loss = epoch_loss / anchors as f64;
        let vloss = val(&w)?.0;
        if !train_loss.is_finite() || !vloss.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(ProbeError::Divergence {
                epoch,
                detail: format!("train loss {train_loss}, validation loss {vloss}"),
            });
        }
        let improved = vloss < best_loss;
        if improved {
            best_loss = vloss;
            best_w.copy_from_slice(&w);
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        log.push(EpochLog {
            epoch,
            train_loss: Some(train_loss),
            validation_loss: vloss,
            best: improved,
        });
        log::debug!("epoch {epoch}: train {train_loss:.5} validation {vloss:.5}");
        if stale >= cfg.patience {
            break;
        }
    }
    let mut params = to_params(layer, d_in, cfg, &best_w)?;
    params.meta.seed = cfg.seed;
    params.meta.epochs_run = log.len() - 1;
    params.meta.best_epoch = best_epoch;
    params.meta.final_validation_loss = best_loss;
    params.meta.config = Some(cfg.clone());
    Ok(TrainOutcome { params, log })
}

/// mAP of projected frames from `pool`, thinned to at most `max_frames`.
pub fn projected_map(
    params: &ProbeParams,
    pool: &FramePool,
    max_frames: usize,
    exec: Execution,
) -> Result<MapResult> {
    let pool = pool.thinned(max_frames);
    let proj = params.project_frames(pool.frames())?;
    let (ty, tok) = pool.frame_labels();
    mean_average_precision(&proj, params.d_out(), &ty, &tok, exec)
}
