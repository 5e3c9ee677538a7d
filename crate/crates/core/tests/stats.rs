use morphoprobe::seed::rng_from;
use morphoprobe::stats::{
    build_design, fit_ols, interaction_strength, welch_t, AllomorphCoding, Design, TrialRow,
};
use morphoprobe::stimuli::{Allomorph, Inflection};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

// Samples and expected statistics frozen from scipy.stats.ttest_ind(equal_var=False).
const A: [f64; 50] = [
    -0.211189, -0.517733, 0.149596, -1.789897, 0.284452, -0.321696, -0.72605, 0.098537, -1.951474, -0.158413,
    -0.731285, 0.409695, 0.442442, -0.927863, -0.933168, -1.470037, -0.787689, 0.319414, 0.85727, 0.2288,
    0.034799, -0.867447, 0.19577, -0.81569, 0.239629, -0.202593, 0.856018, 0.20247, 1.368825, -0.408214,
    0.755945, 0.225161, 1.696556, -1.962054, 0.874258, -1.023652, -0.868647, -0.018363, -1.510559, -1.194581,
    -0.505542, -0.322484, -1.903679, -0.873631, -0.145914, -0.131928, -0.662308, -0.004089, -0.513374, 1.173499,
];
const B: [f64; 50] = [
    0.190865, 1.059104, 0.510405, 1.854562, 0.028451, 1.876603, -0.195302, -0.366997, 0.45153, 1.092127,
    -0.521024, 0.495811, 0.99603, 0.964442, 1.875566, 1.784274, 1.332831, 1.913433, 1.939726, -0.109162,
    3.185262, 0.951073, 0.394058, 1.600149, 0.511423, 1.627157, -0.201399, 1.725358, -0.263874, 1.375733,
    0.786775, 0.498517, 1.153073, 0.424692, 0.228057, 1.394906, 2.931207, 0.002243, 2.155167, 2.081558,
    -0.12008, 1.190235, 1.524039, 0.089144, 2.079218, 1.87791, 2.698438, 1.389834, 1.94603, 2.812117,
];
const C: [f64; 50] = [
    0.202991, -0.500223, -1.450914, 0.286455, -1.267217, 1.097693, 0.147165, 0.811057, 0.162714, 1.238331,
    -0.456355, 0.050068, 1.400115, -1.258311, 0.192527, 0.975257, -1.063533, -0.699719, -1.249911, 1.180756,
    -0.18938, -0.315153, -1.412544, -1.063788, 0.926532, -0.189466, -0.400887, 0.791898, -0.90587, 1.613377,
    -0.368215, -0.513043, -0.265165, 0.037342, 0.701169, -0.698836, -0.824027, 0.038157, 0.338946, 0.877255,
    -0.476753, 0.967012, -1.019893, 1.385778, -1.092072, -0.086264, 0.195294, 1.013168, 1.460168, 0.049231,
];
const D: [f64; 30] = [
    3.891289, -1.539051, 0.754172, -0.373801, 1.244853, -1.803715, -2.095674, 2.666321, 2.228061, 1.222236,
    -1.304426, 1.284142, 0.994315, 2.566926, 0.565833, -3.129038, -0.33252, 0.04511, 1.68441, -0.395546,
    -2.016434, 2.400784, 0.871198, -2.094848, -1.227678, 1.938291, -2.598735, 2.035952, 0.145744, -0.204439,
];

#[test]
fn welch_matches_reference() {
    let r = welch_t(&A, &B).unwrap();
    assert!((r.t - -7.72768506521349).abs() < 1e-10, "{}", r.t);
    assert!((r.df - 96.96714185963872).abs() < 1e-10, "{}", r.df);
    assert!((r.p - 1.0141392347523031e-11).abs() < 1e-10);
    assert!((r.p / 1.0141392347523031e-11 - 1.0).abs() < 1e-6, "{}", r.p);

    let r = welch_t(&C, &D).unwrap();
    assert!((r.t - -0.6826177872238014).abs() < 1e-10);
    assert!((r.df - 37.14424458059317).abs() < 1e-10);
    assert!((r.p - 0.4990837916745309).abs() < 1e-10);

    let r = welch_t(&B, &A).unwrap();
    assert!((r.t - 7.72768506521349).abs() < 1e-10);
}

#[test]
fn welch_rejects_tiny_or_non_finite_groups() {
    assert!(welch_t(&[1.0], &[1.0, 2.0]).is_err());
    assert!(welch_t(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    assert!(welch_t(&[3.0, 3.0], &[3.0, 3.0]).is_err());
}

fn rows(n: usize, seed: u64) -> Vec<TrialRow> {
    let mut rng = rng_from(seed);
    let infl = [Inflection::Nns, Inflection::Vbz];
    let allo = [Allomorph::S, Allomorph::Z, Allomorph::Iz];
    (0..n)
        .map(|_| TrialRow {
            rank: rng.random_range(0.0..500.0),
            inflection_from: infl[rng.random_range(0..2)],
            inflection_to: infl[rng.random_range(0..2)],
            allomorph_from: allo[rng.random_range(0..3)],
            allomorph_to: allo[rng.random_range(0..3)],
            from_freq: rng.random_range(0.0..5.0),
            to_freq: rng.random_range(0.0..5.0),
        })
        .collect()
}

#[test]
fn duplicated_column_is_rejected() {
    let x: Vec<f64> = (0..20).map(|i| (i * i % 7) as f64).collect();
    let d = Design::from_columns(
        vec!["Intercept".into(), "x".into(), "x_copy".into()],
        &[vec![1.0; 20], x.clone(), x],
    )
    .unwrap();
    let err = fit_ols(&d, &[1.0; 20]).unwrap_err().to_string();
    assert!(err.contains("x_copy"), "{err}");
}

#[test]
fn term_names_are_stable() {
    let a = build_design(&rows(400, 1), AllomorphCoding::Full).unwrap();
    let b = build_design(&rows(400, 2), AllomorphCoding::Full).unwrap();
    assert_eq!(a.terms, b.terms);
    assert_eq!(a.terms[0], "Intercept");
    let s = build_design(&rows(400, 1), AllomorphCoding::SVsRest).unwrap();
    assert_eq!(s.terms.len(), 18);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn affine_outcome_maps_coefficients(seed in 0u64..1000, scale in 0.01f64..100.0, shift in -50.0f64..50.0) {
        let r = rows(300, seed);
        let design = build_design(&r, AllomorphCoding::SVsRest).unwrap();
        let y: Vec<f64> = r.iter().map(|t| t.rank).collect();
        let y2: Vec<f64> = y.iter().map(|v| scale * v + shift).collect();
        let f = fit_ols(&design, &y).unwrap();
        let g = fit_ols(&design, &y2).unwrap();
        for (j, term) in f.terms.iter().enumerate() {
            let want = scale * f.coefficients[j] + if term == "Intercept" { shift } else { 0.0 };
            let tol = 1e-8 * (1.0 + want.abs() + scale * f.coefficients.iter().map(|c| c.abs()).fold(0.0, f64::max));
            prop_assert!((g.coefficients[j] - want).abs() < tol, "{term}: {} vs {want}", g.coefficients[j]);
        }
    }

    #[test]
    fn interaction_strength_ignores_row_order(seed in 0u64..1000) {
        let mut r = rows(300, seed);
        let fit = |r: &[TrialRow]| {
            let d = build_design(r, AllomorphCoding::SVsRest).unwrap();
            let y: Vec<f64> = r.iter().map(|t| t.rank / 1000.0).collect();
            interaction_strength(&fit_ols(&d, &y).unwrap())
        };
        let a = fit(&r);
        r.shuffle(&mut rng_from(seed + 1));
        let b = fit(&r);
        prop_assert_eq!(a.len(), b.len());
        for ((ta, sa), (tb, sb)) in a.iter().zip(&b) {
            prop_assert_eq!(ta, tb);
            prop_assert!((sa - sb).abs() < 1e-9);
        }
    }
}
