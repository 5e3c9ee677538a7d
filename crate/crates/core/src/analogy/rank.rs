use rand::Rng;

use super::{AnalogyError, Result, Views};
use crate::embeddings::EmbeddingStore;
use crate::Execution;

/// Rows whose fast-path distance lies this close to the target's are
/// re-scored with the direct per-sample formula.
const BAND: f64 = 1e-9;

/// `S` predicted vectors (row-major, f64) and the store rows they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub dim: usize,
    pub vectors: Vec<f64>,
    /// `[a, b, c]` rows per sample.
    pub draws: Vec<[usize; 3]>,
}

impl Prediction {
    pub fn samples(&self) -> usize {
        self.draws.len()
    }

    pub fn vector(&self, s: usize) -> &[f64] {
        &self.vectors[s * self.dim..(s + 1) * self.dim]
    }
}

fn pick<R: Rng>(rows: &[usize], rng: &mut R) -> usize {
    rows[rng.random_range(0..rows.len())]
}

fn need<'a>(views: &Views<'a>, word: &str) -> Result<&'a [usize]> {
    let r = views.rows(word);
    if r.is_empty() {
        return Err(AnalogyError::MissingWord(word.to_string()));
    }
    Ok(r)
}

/// Draws `samples` token triples uniformly with replacement and returns
/// `b_i − a_i + c_i` for each.
pub fn predict_vectors<R: Rng>(
    views: &Views<'_>,
    a: &str,
    b: &str,
    c: &str,
    samples: usize,
    rng: &mut R,
) -> Result<Prediction> {
    let ra = match views {
        Views::Word(_) => need(views, a)?,
        Views::Phoneme { .. } => views.rows(a),
    };
    predict_rows(views, ra, need(views, b)?, need(views, c)?, samples, rng)
}

/// As `predict_vectors`, drawing from explicit row sets. With phoneme
/// views `ra` is ignored: the offset is taken within the drawn `b` token.
pub(crate) fn predict_rows<R: Rng>(
    views: &Views<'_>,
    ra: &[usize],
    rb: &[usize],
    rc: &[usize],
    samples: usize,
    rng: &mut R,
) -> Result<Prediction> {
    if samples == 0 {
        return Err(AnalogyError::Invalid("sample count must be positive".into()));
    }
    if rb.is_empty() || rc.is_empty() {
        return Err(AnalogyError::MissingWord("operand".into()));
    }
    let dim = views.ranking().dim();
    let mut vectors = Vec::with_capacity(samples * dim);
    let mut draws = Vec::with_capacity(samples);
    match *views {
        Views::Word(s) => {
            if ra.is_empty() {
                return Err(AnalogyError::MissingWord("operand".into()));
            }
            for _ in 0..samples {
                let (ia, ib, ic) = (pick(ra, rng), pick(rb, rng), pick(rc, rng));
                let (xa, xb, xc) = (s.row(ia), s.row(ib), s.row(ic));
                vectors.extend((0..dim).map(|k| xb[k] as f64 - xa[k] as f64 + xc[k] as f64));
                draws.push([ia, ib, ic]);
            }
        }
        Views::Phoneme { constancy, last } => {
            for _ in 0..samples {
                let (ib, ic) = (pick(rb, rng), pick(rc, rng));
                let (fb, cb, cc) = (last.row(ib), constancy.row(ib), constancy.row(ic));
                vectors.extend((0..dim).map(|k| fb[k] as f64 - cb[k] as f64 + cc[k] as f64));
                draws.push([ib, ib, ic]);
            }
        }
    }
    Ok(Prediction { dim, vectors, draws })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankResult {
    /// Rows ordered strictly before the target's nearest token.
    pub rank: usize,
    /// The target token attaining the minimum averaged distance.
    pub row: usize,
    /// Averaged cosine distance of that token.
    pub distance: f64,
}

fn dot(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, y)| x as f64 * y).sum()
}

/// Units of the predicted vectors, and their mean.
fn units(pred: &Prediction) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = pred.dim;
    let mut unit = Vec::with_capacity(pred.vectors.len());
    let mut mean = vec![0.0; d];
    for s in 0..pred.samples() {
        let v = pred.vector(s);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(AnalogyError::ZeroNorm);
        }
        for k in 0..d {
            unit.push(v[k] / n);
            mean[k] += v[k] / n;
        }
    }
    mean.iter_mut().for_each(|m| *m /= pred.samples() as f64);
    Ok((unit, mean))
}

/// Mean over samples of `1 − cos(row, d̂_s)`, summed sample by sample.
fn direct_distance(store: &EmbeddingStore, row: usize, unit: &[f64], dim: usize) -> f64 {
    let r = store.row(row);
    let n = store.norm(row);
    let samples = unit.len() / dim;
    let mut sum = 0.0;
    for s in 0..samples {
        sum += 1.0 - dot(r, &unit[s * dim..(s + 1) * dim]) / n;
    }
    sum / samples as f64
}

/// Position of the target's nearest token in the averaged-distance ordering
/// of every store row, ties broken by row index.
///
/// Distances are first computed as `1 − r·ū/|r|` with `ū` the mean unit
/// prediction; rows within a narrow band of the target are re-scored with
/// the direct average so the comparison matches the definition.
pub fn rank_target(
    pred: &Prediction,
    store: &EmbeddingStore,
    target_rows: &[usize],
    exec: Execution,
) -> Result<RankResult> {
    if target_rows.is_empty() {
        return Err(AnalogyError::MissingWord("target".into()));
    }
    if pred.dim != store.dim() {
        return Err(AnalogyError::Invalid(format!(
            "prediction dim {} vs store dim {}",
            pred.dim,
            store.dim()
        )));
    }
    let dim = pred.dim;
    let (unit, mean) = units(pred)?;
    let mut fast = vec![0.0f64; store.len()];
    exec.fill(&mut fast, |i, d| *d = 1.0 - dot(store.row(i), &mean) / store.norm(i));

    let best_fast = target_rows.iter().map(|&t| fast[t]).fold(f64::INFINITY, f64::min);
    let (mut distance, mut row) = (f64::INFINITY, usize::MAX);
    for &t in target_rows {
        if fast[t] <= best_fast + BAND {
            let d = direct_distance(store, t, &unit, dim);
            if (d, t) < (distance, row) {
                distance = d;
                row = t;
            }
        }
    }
    let chunk = 4096;
    let counts = exec.map_range(store.len().div_ceil(chunk), |c| {
        let mut n = 0usize;
        for i in c * chunk..((c + 1) * chunk).min(store.len()) {
            let f = fast[i];
            if f < distance - BAND {
                n += 1;
            } else if f <= distance + BAND && i != row {
                let d = direct_distance(store, i, &unit, dim);
                if (d, i) < (distance, row) {
                    n += 1;
                }
            }
        }
        n
    });
    Ok(RankResult {
        rank: counts.iter().sum(),
        row,
        distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::RowMeta;
    use crate::seed::rng_from;

    fn store(rows: &[(&str, [f32; 2])]) -> EmbeddingStore {
        let metas = rows
            .iter()
            .enumerate()
            .map(|(i, (w, _))| RowMeta::word("u", i as u32, w))
            .collect();
        let data = rows.iter().flat_map(|(_, v)| v.to_vec()).collect();
        EmbeddingStore::new("raw-layer-0", "word", 2, data, metas).unwrap()
    }

    fn single(v: [f64; 2]) -> Prediction {
        Prediction {
            dim: 2,
            vectors: v.to_vec(),
            draws: vec![[0, 0, 0]],
        }
    }

    #[test]
    fn nearest_target_has_rank_zero() {
        let s = store(&[("a", [0.0, 1.0]), ("d", [1.0, 0.1]), ("x", [-1.0, 0.0])]);
        let r = rank_target(&single([1.0, 0.0]), &s, s.word_rows("d"), Execution::Sequential).unwrap();
        assert_eq!((r.rank, r.row), (0, 1));
    }

    #[test]
    fn toy_store_by_hand() {
        // angles from d̂ = (1, 0): x 0°, y 30°, d1 45°, z 45°(later row), d2 90°
        let s3 = 3f32.sqrt();
        let s = store(&[
            ("z", [1.0, 1.0]),
            ("x", [2.0, 0.0]),
            ("d", [1.0, 1.0]),
            ("y", [s3, 1.0]),
            ("d", [0.0, 1.0]),
        ]);
        let r = rank_target(&single([3.0, 0.0]), &s, s.word_rows("d"), Execution::Parallel).unwrap();
        // x, y, and z (tied distance, lower row) come first
        assert_eq!((r.rank, r.row), (3, 2));
        assert!((r.distance - (1.0 - 0.5f64.sqrt())).abs() < 1e-7);
    }

    #[test]
    fn single_tokens_give_identical_predictions() {
        let s = store(&[("a", [1.0, 0.0]), ("b", [1.0, 1.0]), ("c", [0.0, 2.0])]);
        let p = predict_vectors(&Views::Word(&s), "a", "b", "c", 5, &mut rng_from(1)).unwrap();
        for k in 0..5 {
            assert_eq!(p.vector(k), &[0.0, 3.0]);
        }
        assert!(predict_vectors(&Views::Word(&s), "a", "b", "zz", 5, &mut rng_from(1)).is_err());
    }

    #[test]
    fn zero_prediction_is_an_error() {
        let s = store(&[("a", [1.0, 0.0]), ("b", [1.0, 1.0]), ("c", [0.0, -1.0])]);
        let p = predict_vectors(&Views::Word(&s), "a", "b", "c", 1, &mut rng_from(1)).unwrap();
        assert!(matches!(
            rank_target(&p, &s, &[0], Execution::Sequential),
            Err(AnalogyError::ZeroNorm)
        ));
    }
}
