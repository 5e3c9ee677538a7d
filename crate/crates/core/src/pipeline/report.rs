use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, write, write_json, OutputLock, PipelineError, Result};
use crate::analogy::TransferMatrix;

/// Figure-data files produced by `report`, in figure order.
pub const FIGURES: [&str; 7] = [
    "fig1_layer_sweep.csv",
    "fig2_pca.csv",
    "fig3_morphology.csv",
    "fig4_false_friends.csv",
    "fig5_allomorphy.csv",
    "fig6_forced_choice_cdf.csv",
    "fig7_interaction_strength.csv",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportIndex {
    pub written: Vec<String>,
    /// Figure file → the results input it lacked.
    pub missing: Vec<(String, String)>,
}

fn views_under(dir: &Path) -> Result<Vec<String>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut v: Vec<String> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    v.sort();
    Ok(v)
}

fn read_json<T: for<'de> Deserialize<'de>>(p: &Path) -> Result<T> {
    let text = fs::read_to_string(p).map_err(io_err(p))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Failed(format!("{}: {e}", p.display())))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Concatenates `{exp}/{view}/{file}` over views, or `None` when no view has it.
fn per_view<F>(results: &Path, exp: &str, file: &str, header: &str, mut body: F) -> Result<Option<String>>
where
    F: FnMut(&str, &Path, &mut String) -> Result<()>,
{
    let mut out = format!("{header}\n");
    let mut any = false;
    for view in views_under(&results.join(exp))? {
        let p = results.join(exp).join(&view).join(file);
        if p.is_file() {
            body(&view, &p, &mut out)?;
            any = true;
        }
    }
    Ok(any.then_some(out))
}

fn matrix_rows(view: &str, m: &TransferMatrix, relabel: impl Fn(&str) -> String, keep: impl Fn(&str) -> bool, prefix: &str, out: &mut String) {
    for c in &m.cells {
        if keep(&c.from) && keep(&c.to) {
            let _ = writeln!(
                out,
                "{view},{prefix}{},{},{},{},{},{},{}",
                relabel(&c.from),
                relabel(&c.to),
                c.n_trials,
                opt(c.mean),
                opt(c.median),
                opt(c.se),
                opt(c.baseline_mean)
            );
        }
    }
}

const CELL_HEADER: &str = "from,to,n_trials,mean,median,se,baseline_mean";

/// Consolidates `results/` under `out` into one CSV per figure in
/// `report/`. Figures whose inputs are absent are listed, not fatal, unless
/// nothing at all can be produced.
pub fn cmd_report(out: &Path) -> Result<ReportIndex> {
    let results = out.join("results");
    let _lock = OutputLock::acquire(out)?;
    let report = out.join("report");
    if report.exists() {
        fs::remove_dir_all(&report).map_err(io_err(&report))?;
    }
    let mut index = ReportIndex::default();
    let mut figs: Vec<(usize, Option<String>, &str)> = Vec::new();

    let sweep = results.join("layer_sweep/series.csv");
    figs.push((0, sweep.is_file().then(|| fs::read_to_string(&sweep)).transpose().map_err(io_err(&sweep))?, "layer_sweep/series.csv"));

    figs.push((
        1,
        per_view(&results, "pca", "basis.json", "view,pair,inflection,allomorph,pc1,pc2", |view, p, s| {
            let diffs = p.with_file_name("differences.csv");
            let text = fs::read_to_string(&diffs).map_err(io_err(&diffs))?;
            for line in text.lines().skip(1) {
                let _ = writeln!(s, "{view},{line}");
            }
            let basis: crate::embeddings::PcaResult = read_json(p)?;
            let m = &basis.mean_direction;
            let _ = writeln!(
                s,
                "{view},mean-direction,,,{},{}",
                m.first().copied().unwrap_or(0.0),
                m.get(1).copied().unwrap_or(0.0)
            );
            Ok(())
        })?,
        "pca/<view>/basis.json",
    ));

    figs.push((
        2,
        per_view(&results, "morphology", "matrix.json", &format!("view,{CELL_HEADER}"), |view, p, s| {
            let m: TransferMatrix = read_json(p)?;
            matrix_rows(view, &m, str::to_string, |_| true, "", s);
            Ok(())
        })?,
        "morphology/<view>/matrix.json",
    ));

    figs.push((
        3,
        per_view(&results, "false_friends", "matrix.json", &format!("view,panel,{CELL_HEADER}"), |view, p, s| {
            let m: TransferMatrix = read_json(p)?;
            for panel in ["NNS", "VBZ"] {
                let relabel = |c: &str| if c == "FF" { format!("{panel}-FF") } else { c.to_string() };
                matrix_rows(view, &m, relabel, |c| c == panel || c == "FF", &format!("{panel},"), s);
            }
            Ok(())
        })?,
        "false_friends/<view>/matrix.json",
    ));

    figs.push((
        4,
        per_view(&results, "allomorphy", "matrix.json", &format!("view,{CELL_HEADER}"), |view, p, s| {
            let m: TransferMatrix = read_json(p)?;
            matrix_rows(view, &m, str::to_string, |_| true, "", s);
            Ok(())
        })?,
        "allomorphy/<view>/matrix.json",
    ));

    figs.push((
        5,
        per_view(&results, "forced_choice", "cdf.json", "view,preference,cumulative_fraction", |view, p, s| {
            let cdf: Vec<(f64, f64)> = read_json(p)?;
            for (x, f) in cdf {
                let _ = writeln!(s, "{view},{x},{f}");
            }
            Ok(())
        })?,
        "forced_choice/<view>/cdf.json",
    ));

    figs.push((
        6,
        per_view(&results, "regression", "interactions.json", "view,term,strength", |view, p, s| {
            let v: Vec<(String, f64)> = read_json(p)?;
            for (term, x) in v {
                let _ = writeln!(s, "{view},{term},{x}");
            }
            Ok(())
        })?,
        "regression/<view>/interactions.json",
    ));

    for (i, body, input) in figs {
        let name = FIGURES[i];
        match body {
            Some(b) => {
                write(&report.join(name), b)?;
                index.written.push(name.to_string());
            }
            None => index.missing.push((name.to_string(), input.to_string())),
        }
    }
    if index.written.is_empty() {
        let list: Vec<String> = index.missing.iter().map(|(_, i)| format!("results/{i}")).collect();
        return Err(PipelineError::Failed(format!("no results to report; missing {}", list.join(", "))));
    }
    for (f, i) in &index.missing {
        log::warn!("{f} not written: results/{i} missing");
    }
    write_json(&report.join("index.json"), &index)?;
    Ok(index)
}
