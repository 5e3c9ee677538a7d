use super::{ProbeError, Result};
use crate::Execution;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapResult {
    pub map: f64,
    /// Queries that had at least one relevant item.
    pub queries: usize,
    /// Queries with no other token of their type.
    pub skipped: usize,
}

fn unit_rows(vectors: &[f32], dim: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(vectors.len());
    for row in vectors.chunks_exact(dim) {
        let n = row.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(ProbeError::ZeroNorm);
        }
        out.extend(row.iter().map(|&v| v as f64 / n));
    }
    Ok(out)
}

/// Retrieval mean average precision under cosine similarity.
///
/// Each vector queries all others; relevant items share its type label
/// but come from a different token. Ties in similarity are broken by
/// lower index.
pub fn mean_average_precision(
    vectors: &[f32],
    dim: usize,
    types: &[u32],
    tokens: &[u32],
    exec: Execution,
) -> Result<MapResult> {
    if dim == 0 || !vectors.len().is_multiple_of(dim) {
        return Err(ProbeError::DimensionMismatch {
            expected: dim,
            got: vectors.len(),
        });
    }
    let n = vectors.len() / dim;
    if types.len() != n || tokens.len() != n {
        return Err(ProbeError::DimensionMismatch {
            expected: n,
            got: types.len().min(tokens.len()),
        });
    }
    let mut distinct = types.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(ProbeError::InsufficientData("mAP needs at least two labels".into()));
    }
    let unit = unit_rows(vectors, dim)?;
    let ap = exec.map_range(n, |q| {
        let qv = &unit[q * dim..(q + 1) * dim];
        let relevant = |i: usize| types[i] == types[q] && tokens[i] != tokens[q];
        let n_rel = (0..n).filter(|&i| relevant(i)).count();
        if n_rel == 0 {
            return None;
        }
        let mut scored: Vec<(f64, usize)> = (0..n)
            .filter(|&i| i != q)
            .map(|i| {
                let v = &unit[i * dim..(i + 1) * dim];
                (qv.iter().zip(v).map(|(a, b)| a * b).sum::<f64>(), i)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut hits = 0usize;
        let mut sum = 0.0;
        for (pos, &(_, i)) in scored.iter().enumerate() {
            if relevant(i) {
                hits += 1;
                sum += hits as f64 / (pos + 1) as f64;
                if hits == n_rel {
                    break;
                }
            }
        }
        Some(sum / n_rel as f64)
    });
    let scored: Vec<f64> = ap.iter().flatten().copied().collect();
    let skipped = n - scored.len();
    let map = if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    Ok(MapResult {
        map,
        queries: scored.len(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_clusters_score_one() {
        let v = [1.0, 0.0, 0.9, 0.1, 0.0, 1.0, 0.1, 0.9];
        let r = mean_average_precision(&v, 2, &[0, 0, 1, 1], &[0, 1, 2, 3], Execution::Sequential)
            .unwrap();
        assert_eq!(r.map, 1.0);
        assert_eq!((r.queries, r.skipped), (4, 0));
    }

    #[test]
    fn hand_computed_ranking() {
        // query 0: order 3 (type 1), 1 (rel), 2 (type 1) -> AP = 1/2
        let v = [1.0, 0.0, 0.6, 0.8, 0.0, 1.0, 0.9, 0.1];
        let r = mean_average_precision(&v, 2, &[0, 0, 1, 1], &[0, 1, 2, 3], Execution::Sequential)
            .unwrap();
        // q1: 2 (.8), 3 (.68), 0 (.6) -> 1/3; q2: 1, 3, 0 -> 1/2; q3: 0, 1, 2 -> 1/3
        let want = (0.5 + 1.0 / 3.0 + 0.5 + 1.0 / 3.0) / 4.0;
        assert!((r.map - want).abs() < 1e-12, "{}", r.map);
    }

    #[test]
    fn same_token_frames_are_not_relevant() {
        let v = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let r = mean_average_precision(&v, 2, &[0, 0, 1], &[0, 0, 1], Execution::Sequential)
            .unwrap();
        assert_eq!((r.queries, r.skipped), (0, 3));
    }

    #[test]
    fn single_label_is_rejected() {
        assert!(mean_average_precision(&[1.0, 1.0], 1, &[0, 0], &[0, 1], Execution::Sequential).is_err());
    }

    #[test]
    fn modes_agree() {
        let v: Vec<f32> = (0..60).map(|i| ((i * 37 % 11) as f32) - 5.0 + 0.5).collect();
        let ty: Vec<u32> = (0..20).map(|i| i % 4).collect();
        let tok: Vec<u32> = (0..20).map(|i| i / 2).collect();
        let a = mean_average_precision(&v, 3, &ty, &tok, Execution::Sequential).unwrap();
        let b = mean_average_precision(&v, 3, &ty, &tok, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
