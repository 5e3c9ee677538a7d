use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::TrialOutcome;
use crate::stimuli::{Allomorph, Inflection};

pub(crate) fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub(crate) fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    Some(if s.len() % 2 == 1 { s[m] } else { (s[m - 1] + s[m]) / 2.0 })
}

/// Category label of a pair by inflection only.
pub fn inflection_category(inflection: Inflection, _allomorph: Allomorph) -> String {
    inflection.label().to_string()
}

/// Category label of a pair by inflection and allomorph, e.g. `NNS [z]`.
pub fn allomorph_category(inflection: Inflection, allomorph: Allomorph) -> String {
    format!("{} [{}]", inflection.label(), allomorph.label())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStat {
    pub from: String,
    pub to: String,
    pub n_trials: usize,
    pub n_targets: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    /// Standard error of the per-target-pair mean ranks.
    pub se: Option<f64>,
    pub baseline_mean: Option<f64>,
}

/// Square matrix of cell statistics over a fixed category list; cells with
/// no trials are kept as nulls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub categories: Vec<String>,
    /// Row-major: `cells[i * n + j]` is `categories[i] -> categories[j]`.
    pub cells: Vec<CellStat>,
}

/// Aggregates trials into cells keyed by `key(inflection, allomorph)` of the
/// source and target pairs. Trials outside `categories` are ignored.
pub fn transfer_matrix(
    trials: &[TrialOutcome],
    categories: &[String],
    key: fn(Inflection, Allomorph) -> String,
) -> TransferMatrix {
    let n = categories.len();
    let pos: BTreeMap<&str, usize> = categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut groups: Vec<Vec<&TrialOutcome>> = vec![Vec::new(); n * n];
    for t in trials {
        let (f, g) = (key(t.inflection_from, t.allomorph_from), key(t.inflection_to, t.allomorph_to));
        if let (Some(&i), Some(&j)) = (pos.get(f.as_str()), pos.get(g.as_str())) {
            groups[i * n + j].push(t);
        }
    }
    let cells = groups
        .iter()
        .enumerate()
        .map(|(k, ts)| {
            let ranks: Vec<f64> = ts.iter().map(|t| t.rank as f64).collect();
            let mut per_target: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for t in ts {
                per_target.entry(t.target.as_str()).or_default().push(t.rank as f64);
            }
            let target_means: Vec<f64> = per_target.values().map(|v| mean(v).unwrap()).collect();
            let se = (target_means.len() >= 2).then(|| {
                let m = mean(&target_means).unwrap();
                let var = target_means.iter().map(|x| (x - m).powi(2)).sum::<f64>()
                    / (target_means.len() - 1) as f64;
                (var / target_means.len() as f64).sqrt()
            });
            let base: Vec<f64> = ts.iter().filter_map(|t| t.baseline_rank).map(|r| r as f64).collect();
            CellStat {
                from: categories[k / n].clone(),
                to: categories[k % n].clone(),
                n_trials: ts.len(),
                n_targets: per_target.len(),
                mean: mean(&ranks),
                median: median(&ranks),
                se,
                baseline_mean: mean(&base),
            }
        })
        .collect();
    TransferMatrix {
        categories: categories.to_vec(),
        cells,
    }
}

impl TransferMatrix {
    pub fn cell(&self, from: &str, to: &str) -> Option<&CellStat> {
        let i = self.categories.iter().position(|c| c == from)?;
        let j = self.categories.iter().position(|c| c == to)?;
        Some(&self.cells[i * self.categories.len() + j])
    }

    fn trial_weighted(&self, diagonal: bool) -> Option<f64> {
        let n = self.categories.len();
        let (mut sum, mut count) = (0.0, 0usize);
        for (k, c) in self.cells.iter().enumerate() {
            if (k / n == k % n) == diagonal {
                if let Some(m) = c.mean {
                    sum += m * c.n_trials as f64;
                    count += c.n_trials;
                }
            }
        }
        (count > 0).then(|| sum / count as f64)
    }

    /// Mean rank over all trials in diagonal cells.
    pub fn diagonal_mean(&self) -> Option<f64> {
        self.trial_weighted(true)
    }

    /// Mean rank over all trials in off-diagonal cells.
    pub fn off_diagonal_mean(&self) -> Option<f64> {
        self.trial_weighted(false)
    }

    /// Off-diagonal minus diagonal mean rank.
    pub fn mismatch_penalty(&self) -> Option<f64> {
        Some(self.off_diagonal_mean()? - self.diagonal_mean()?)
    }

    /// Long format: one line per cell.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("from,to,n_trials,n_targets,mean,median,se,baseline_mean\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                c.from,
                c.to,
                c.n_trials,
                c.n_targets,
                opt(c.mean),
                opt(c.median),
                opt(c.se),
                opt(c.baseline_mean)
            );
        }
        s
    }

    /// Grid of means (or medians) with source categories as rows.
    pub fn to_grid_csv(&self, median: bool) -> String {
        let n = self.categories.len();
        let mut s = format!("from\\to,{}\n", self.categories.join(","));
        for i in 0..n {
            s.push_str(&self.categories[i]);
            for j in 0..n {
                let c = &self.cells[i * n + j];
                let v = if median { c.median } else { c.mean };
                s.push(',');
                if let Some(v) = v {
                    let _ = write!(s, "{v}");
                }
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(src: &str, tgt: &str, fi: Inflection, ti: Inflection, rank: usize) -> TrialOutcome {
        TrialOutcome {
            source: src.into(),
            target: tgt.into(),
            inflection_from: fi,
            inflection_to: ti,
            allomorph_from: Allomorph::Z,
            allomorph_to: Allomorph::S,
            rank,
            distance: 0.1,
            target_row: 0,
            rows: 10,
            samples: 1,
            seed: 0,
            baseline_rank: None,
        }
    }

    #[test]
    fn cells_means_medians_and_nulls() {
        use Inflection::*;
        let ts = vec![
            trial("a:as", "b:bs", Nns, Nns, 1),
            trial("b:bs", "a:as", Nns, Nns, 3),
            trial("a:as", "c:cs", Nns, Vbz, 10),
            trial("b:bs", "c:cs", Nns, Vbz, 20),
            trial("b:bs", "c:cs", Nns, Ff, 20),
        ];
        let cats = vec!["NNS".to_string(), "VBZ".to_string()];
        let m = transfer_matrix(&ts, &cats, inflection_category);
        let nn = m.cell("NNS", "NNS").unwrap();
        assert_eq!((nn.n_trials, nn.mean, nn.median), (2, Some(2.0), Some(2.0)));
        assert_eq!(nn.n_targets, 2);
        assert_eq!(nn.se, Some(1.0));
        let nv = m.cell("NNS", "VBZ").unwrap();
        assert_eq!((nv.mean, nv.n_targets, nv.se), (Some(15.0), 1, None));
        assert_eq!(m.cell("VBZ", "VBZ").unwrap().mean, None);
        assert_eq!(m.mismatch_penalty(), Some(13.0));
        assert!(m.to_grid_csv(false).contains("NNS,2,15\nVBZ,,\n"));
    }

    #[test]
    fn allomorph_labels() {
        assert_eq!(allomorph_category(Inflection::Vbz, Allomorph::Iz), "VBZ [Iz]");
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
    }
}
