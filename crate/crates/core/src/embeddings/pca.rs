use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingStore, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub mean: Vec<f64>,
    /// Orthonormal principal axes, largest variance first.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    /// `b - a` for each requested row pair, in component coordinates.
    pub differences: Vec<Vec<f64>>,
    /// Mean of `differences`.
    pub mean_direction: Vec<f64>,
}

impl PcaResult {
    /// Coordinates of a point (centered on the fitted mean).
    pub fn project(&self, x: &[f32]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((a, &v), m)| a * (v as f64 - m)).sum())
            .collect()
    }
}

/// Fits PCA on every store row and projects the difference vectors of
/// `pairs` (`(a_row, b_row)`, giving `b - a`) onto the top `k` axes.
///
/// Fewer than `k` axes are returned, with a warning, when the covariance
/// has fewer than `k` non-negligible eigenvalues.
pub fn pca_project(store: &EmbeddingStore, k: usize, pairs: &[(usize, usize)]) -> Result<PcaResult> {
    let (n, d) = (store.len(), store.dim());
    if k == 0 || n <= k {
        return Err(EmbedError::Insufficient(format!(
            "PCA with {k} components needs more than {k} rows, store has {n}"
        )));
    }
    let mut mean = vec![0.0f64; d];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(store.row(i)) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for i in 0..n {
        for ((c, &v), m) in centered.iter_mut().zip(store.row(i)).zip(&mean) {
            *c = v as f64 - m;
        }
        for a in 0..d {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            for b in a..d {
                cov[(a, b)] += ca * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let trace: f64 = (0..d).map(|i| cov[(i, i)]).sum();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = top * d as f64 * f64::EPSILON * 16.0;
    let mut components = Vec::new();
    let mut explained_variance = Vec::new();
    for &j in order.iter().take(k) {
        let lambda = eig.eigenvalues[j];
        if lambda <= tol {
            break;
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
        // sign convention: largest-magnitude entry positive
        let pivot = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap();
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(lambda);
    }
    if components.len() < k {
        log::warn!("PCA: only {} of {k} components have nonzero variance", components.len());
    }
    let explained_ratio = explained_variance
        .iter()
        .map(|v| if trace > 0.0 { v / trace } else { 0.0 })
        .collect();
    let mut differences = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        if a >= n || b >= n {
            return Err(EmbedError::InvalidStore(format!("pair ({a}, {b}) out of range")));
        }
        let (ra, rb) = (store.row(a), store.row(b));
        differences.push(
            components
                .iter()
                .map(|c| c.iter().zip(ra.iter().zip(rb)).map(|(w, (&x, &y))| w * (y as f64 - x as f64)).sum())
                .collect::<Vec<f64>>(),
        );
    }
    let mut mean_direction = vec![0.0; components.len()];
    for dvec in &differences {
        mean_direction.iter_mut().zip(dvec).for_each(|(m, v)| *m += v);
    }
    if !differences.is_empty() {
        mean_direction.iter_mut().for_each(|m| *m /= differences.len() as f64);
    }
    Ok(PcaResult {
        mean,
        components,
        explained_variance,
        explained_ratio,
        differences,
        mean_direction,
    })
}
