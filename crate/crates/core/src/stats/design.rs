use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Result, StatsError, INTERACTION};
use crate::analogy::TrialOutcome;
use crate::corpus_io::FrequencyTable;
use crate::stimuli::{Allomorph, Inflection};

/// One analogy trial as a regression observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub rank: f64,
    pub inflection_from: Inflection,
    pub inflection_to: Inflection,
    pub allomorph_from: Allomorph,
    pub allomorph_to: Allomorph,
    pub from_freq: f64,
    pub to_freq: f64,
}

impl TrialRow {
    /// Looks up the log frequencies of the source and target inflected
    /// words; `None` when either is missing.
    pub fn from_trial(t: &TrialOutcome, freq: &FrequencyTable) -> Option<Self> {
        Some(TrialRow {
            rank: t.rank as f64,
            inflection_from: t.inflection_from,
            inflection_to: t.inflection_to,
            allomorph_from: t.allomorph_from,
            allomorph_to: t.allomorph_to,
            from_freq: freq.get(t.source_word())?,
            to_freq: freq.get(t.target_word())?,
        })
    }
}

/// How the three allomorphs enter the design.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllomorphCoding {
    /// Dummies for `S` and `Iz` against reference `z`.
    Full,
    /// One dummy for `S` against `z` and `Iz` together.
    SVsRest,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub terms: Vec<String>,
    pub x: DMatrix<f64>,
    /// Terms left out because a factor had one level or a column was all zero.
    pub dropped: Vec<String>,
}

impl Design {
    /// A design from explicit named columns.
    pub fn from_columns(terms: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.first().map(Vec::len).unwrap_or(0);
        if terms.len() != columns.len() || columns.iter().any(|c| c.len() != n) {
            return Err(StatsError::Invalid("ragged design columns".into()));
        }
        let x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
        Ok(Design {
            terms,
            x,
            dropped: Vec::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }
}

/// Dummy columns of one factor: `(level name, indicator per row)`.
type Dummies = Vec<(String, Vec<f64>)>;

fn inflection_dummies(name: &str, vals: &[Inflection]) -> Dummies {
    vec![(
        format!("{name}=VBZ"),
        vals.iter().map(|&v| (v == Inflection::Vbz) as u8 as f64).collect(),
    )]
}

fn allomorph_dummies(name: &str, vals: &[Allomorph], coding: AllomorphCoding) -> Dummies {
    let levels: &[(Allomorph, &str)] = match coding {
        AllomorphCoding::Full => &[(Allomorph::S, "S"), (Allomorph::Iz, "IZ")],
        AllomorphCoding::SVsRest => &[(Allomorph::S, "S")],
    };
    levels
        .iter()
        .map(|&(a, l)| {
            (
                format!("{name}={l}"),
                vals.iter().map(|&v| (v == a) as u8 as f64).collect(),
            )
        })
        .collect()
}

fn distinct<T: PartialEq + Copy>(v: &[T]) -> usize {
    let mut seen: Vec<T> = Vec::new();
    for &x in v {
        if !seen.contains(&x) {
            seen.push(x);
        }
    }
    seen.len()
}

/// Treatment-coded full factorial over inflection_from, inflection_to,
/// allomorph_from and allomorph_to (reference levels NNS and z), plus
/// additive `from_freq` and `to_freq` and an intercept.
///
/// Columns: intercept, then interaction orders 1 to 4 (factors in the order
/// above), then the two frequencies. A factor observed at a single level is
/// dropped with every term it enters, as is any all-zero column.
pub fn build_design(rows: &[TrialRow], coding: AllomorphCoding) -> Result<Design> {
    if rows.is_empty() {
        return Err(StatsError::Invalid("no rows".into()));
    }
    if rows
        .iter()
        .any(|r| r.inflection_from == Inflection::Ff || r.inflection_to == Inflection::Ff)
    {
        return Err(StatsError::Invalid("regression rows must be NNS or VBZ".into()));
    }
    if rows.iter().any(|r| !r.from_freq.is_finite() || !r.to_freq.is_finite() || !r.rank.is_finite()) {
        return Err(StatsError::Invalid("non-finite value in regression rows".into()));
    }
    let inf_from: Vec<_> = rows.iter().map(|r| r.inflection_from).collect();
    let inf_to: Vec<_> = rows.iter().map(|r| r.inflection_to).collect();
    let al_from: Vec<_> = rows.iter().map(|r| r.allomorph_from).collect();
    let al_to: Vec<_> = rows.iter().map(|r| r.allomorph_to).collect();
    let factors: [(Dummies, bool); 4] = [
        (inflection_dummies("inflection_from", &inf_from), distinct(&inf_from) > 1),
        (inflection_dummies("inflection_to", &inf_to), distinct(&inf_to) > 1),
        (allomorph_dummies("allomorph_from", &al_from, coding), distinct(&al_from) > 1),
        (allomorph_dummies("allomorph_to", &al_to, coding), distinct(&al_to) > 1),
    ];
    let n = rows.len();
    let mut terms = vec!["Intercept".to_string()];
    let mut cols = vec![vec![1.0; n]];
    let mut dropped = Vec::new();
    let mut masks: Vec<u32> = (1..16).collect();
    masks.sort_by_key(|&m| (m.count_ones(), (0..4).filter(|f| m & (1 << f) != 0).collect::<Vec<u32>>()));
    for mask in masks {
        let members: Vec<usize> = (0..4).filter(|f| mask & (1 << f) != 0).collect();
        // every combination of one dummy per member factor
        let mut combos: Vec<(Vec<String>, Vec<f64>)> = vec![(Vec::new(), vec![1.0; n])];
        for &f in &members {
            let mut next = Vec::new();
            for (names, col) in &combos {
                for (lname, d) in &factors[f].0 {
                    let mut nm = names.clone();
                    nm.push(lname.clone());
                    next.push((nm, col.iter().zip(d).map(|(a, b)| a * b).collect()));
                }
            }
            combos = next;
        }
        let live = members.iter().all(|&f| factors[f].1);
        for (names, col) in combos {
            let name = names.join(INTERACTION);
            if !live || col.iter().all(|&v| v == 0.0) {
                dropped.push(name);
            } else {
                terms.push(name);
                cols.push(col);
            }
        }
    }
    terms.push("from_freq".into());
    cols.push(rows.iter().map(|r| r.from_freq).collect());
    terms.push("to_freq".into());
    cols.push(rows.iter().map(|r| r.to_freq).collect());
    let mut d = Design::from_columns(terms, &cols)?;
    d.dropped = dropped;
    Ok(d)
}
