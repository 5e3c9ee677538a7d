use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Design, Result, StatsError, INTERACTION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    /// `None` when there are no residual degrees of freedom.
    pub std_errors: Option<Vec<f64>>,
    pub residual_variance: Option<f64>,
    pub n: usize,
    pub r_squared: f64,
}

impl RegressionFit {
    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.terms.iter().position(|t| t == term).map(|i| self.coefficients[i])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("term,estimate,std_error\n");
        for (i, t) in self.terms.iter().enumerate() {
            let se = self.std_errors.as_ref().map(|v| v[i].to_string()).unwrap_or_default();
            s.push_str(&format!("{t},{},{se}\n", self.coefficients[i]));
        }
        s
    }
}

/// Least squares by Householder QR. A column whose `R` diagonal is
/// negligible relative to the largest one is aliased with earlier
/// columns, and the fit is refused.
pub fn fit_ols(design: &Design, y: &[f64]) -> Result<RegressionFit> {
    let (n, p) = design.x.shape();
    if y.len() != n {
        return Err(StatsError::Invalid(format!("{} outcomes for {n} rows", y.len())));
    }
    if n < p {
        return Err(StatsError::TooFewRows { rows: n, cols: p });
    }
    let qr = design.x.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let aliased: Vec<String> = (0..p)
        .filter(|&i| r[(i, i)].abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE))
        .map(|i| design.terms[i].clone())
        .collect();
    if !aliased.is_empty() {
        return Err(StatsError::Singular(aliased));
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| StatsError::Singular(design.terms.clone()))?;
    let resid = &yv - &design.x * &beta;
    let rss = resid.norm_squared();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let (residual_variance, std_errors) = if n > p {
        let s2 = rss / (n - p) as f64;
        let rinv = r
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .ok_or_else(|| StatsError::Singular(design.terms.clone()))?;
        let se = (0..p)
            .map(|j| (s2 * rinv.row(j).norm_squared()).sqrt())
            .collect();
        (Some(s2), Some(se))
    } else {
        (None, None)
    };
    Ok(RegressionFit {
        terms: design.terms.clone(),
        coefficients: beta.iter().copied().collect(),
        std_errors,
        residual_variance,
        n,
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 1.0 },
    })
}

/// `(term, |coefficient|)` for every interaction term, strongest first.
pub fn interaction_strength(fit: &RegressionFit) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = fit
        .terms
        .iter()
        .zip(&fit.coefficients)
        .filter(|(t, _)| t.contains(INTERACTION))
        .map(|(t, c)| (t.clone(), c.abs()))
        .collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionComparison {
    pub term: String,
    pub strength_a: f64,
    pub strength_b: f64,
    /// `strength_a − strength_b`.
    pub difference: f64,
}

/// Interaction strengths of two fits over their shared terms, by term name.
pub fn compare_interactions(a: &RegressionFit, b: &RegressionFit) -> Vec<InteractionComparison> {
    let bs: BTreeMap<String, f64> = interaction_strength(b).into_iter().collect();
    let mut out: Vec<InteractionComparison> = interaction_strength(a)
        .into_iter()
        .filter_map(|(term, sa)| {
            let sb = *bs.get(&term)?;
            Some(InteractionComparison {
                term,
                strength_a: sa,
                strength_b: sb,
                difference: sa - sb,
            })
        })
        .collect();
    out.sort_by(|x, y| x.term.cmp(&y.term));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(cols: &[Vec<f64>]) -> Design {
        let names = (0..cols.len()).map(|i| format!("c{i}")).collect();
        Design::from_columns(names, cols).unwrap()
    }

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x1: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let x2: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64).collect();
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 1.5 - 2.0 * a + 0.25 * b).collect();
        let f = fit_ols(&design(&[vec![1.0; 20], x1, x2]), &y).unwrap();
        for (c, w) in f.coefficients.iter().zip([1.5, -2.0, 0.25]) {
            assert!((c - w).abs() < 1e-8);
        }
        assert!(f.residual_variance.unwrap() < 1e-20);
    }

    #[test]
    fn duplicated_column_is_rejected() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let d = design(&[vec![1.0; 10], x.clone(), x]);
        match fit_ols(&d, &[0.0; 10]) {
            Err(StatsError::Singular(t)) => assert_eq!(t, vec!["c2".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_columns() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 1.7).cos() * 3.0).collect();
        let d = design(&[vec![1.0; 30], x]);
        let f = fit_ols(&d, &y).unwrap();
        let b = DVector::from_vec(f.coefficients.clone());
        let r = DVector::from_vec(y.clone()) - &d.x * b;
        for j in 0..2 {
            let dot = d.x.column(j).dot(&r);
            assert!(dot.abs() < 1e-8 * d.x.column(j).norm() * DVector::from_vec(y.clone()).norm());
        }
    }

    #[test]
    fn affine_outcome_maps_coefficients() {
        let x: Vec<f64> = (0..25).map(|i| ((i * 13) % 7) as f64).collect();
        let y: Vec<f64> = (0..25).map(|i| ((i * 5) % 11) as f64).collect();
        let d = design(&[vec![1.0; 25], x]);
        let f = fit_ols(&d, &y).unwrap();
        let y2: Vec<f64> = y.iter().map(|v| 3.0 * v + 2.0).collect();
        let g = fit_ols(&d, &y2).unwrap();
        assert!((g.coefficients[0] - (3.0 * f.coefficients[0] + 2.0)).abs() < 1e-9);
        assert!((g.coefficients[1] - 3.0 * f.coefficients[1]).abs() < 1e-9);
    }

    #[test]
    fn strengths_sorted_and_compared() {
        let fit = |c: [f64; 3]| RegressionFit {
            terms: vec!["a".into(), "a × b".into(), "a × c".into()],
            coefficients: c.to_vec(),
            std_errors: None,
            residual_variance: None,
            n: 3,
            r_squared: 1.0,
        };
        let a = fit([9.0, -0.5, 2.0]);
        assert_eq!(interaction_strength(&a), vec![("a × c".to_string(), 2.0), ("a × b".to_string(), 0.5)]);
        let z = fit([1.0, 0.0, 0.0]);
        assert!(interaction_strength(&z).iter().all(|(_, s)| *s == 0.0));
        let cmp = compare_interactions(&a, &z);
        assert_eq!(cmp[0].term, "a × b");
        assert_eq!(cmp[1].difference, 2.0);
    }
}
