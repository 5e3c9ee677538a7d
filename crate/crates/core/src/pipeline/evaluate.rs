use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use super::run::{embed, load_corpus, load_stimuli, Stimuli};
use super::{io_err, store_path, write, write_json, write_jsonl, OutputLock, PipelineConfig, PipelineError, Provenance, Result};
use crate::analogy::{
    allomorph_category, forced_choice, inflection_category, layer_sweep, preference_cdf, run_trials,
    same_word_eval, transfer_matrix, LayerPoint, TransferMatrix, TrialOutcome, Views,
};
use crate::corpus_io::FrequencyTable;
use crate::embeddings::{pca_project, read_store_file, EmbeddingStore, Pooling, Space};
use crate::stats::{
    build_design, compare_interactions, fit_ols, interaction_strength, welch_t, AllomorphCoding,
    RegressionFit, TrialRow,
};
use crate::stimuli::{Allomorph, Inflection, InflectionPair};
use crate::Execution;

/// Files written (relative to `results/`) and soft failures.
#[derive(Clone, Debug, Default, Serialize)]
pub struct EvaluateReport {
    pub files: Vec<String>,
    pub failures: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    root: PathBuf,
    exec: Execution,
    report: EvaluateReport,
}

impl Ctx<'_> {
    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn note(&mut self, rel: &str) {
        self.report.files.push(rel.to_string());
    }

    fn text(&mut self, rel: &str, s: impl AsRef<[u8]>) -> Result<()> {
        write(&self.path(rel), s)?;
        self.note(rel);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, v: &T) -> Result<()> {
        write_json(&self.path(rel), v)?;
        self.note(rel);
        Ok(())
    }

    fn jsonl<T: Serialize>(&mut self, rel: &str, v: &[T]) -> Result<()> {
        write_jsonl(&self.path(rel), v)?;
        self.note(rel);
        Ok(())
    }

    /// Records a soft failure; I/O problems stay hard.
    fn soft<T>(&mut self, what: &str, r: Result<T>) -> Result<Option<T>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(e @ PipelineError::Io { .. }) => Err(e),
            Err(e) => {
                log::warn!("{what}: {e}");
                self.report.failures.push(format!("{what}: {e}"));
                Ok(None)
            }
        }
    }
}

fn is_real(t: &TrialOutcome) -> bool {
    t.inflection_from != Inflection::Ff && t.inflection_to != Inflection::Ff
}

fn categories_inflection() -> Vec<String> {
    vec!["NNS".into(), "VBZ".into()]
}

fn categories_allomorph() -> Vec<String> {
    [Inflection::Nns, Inflection::Vbz]
        .iter()
        .flat_map(|&i| Allomorph::ALL.iter().map(move |&a| allomorph_category(i, a)))
        .collect()
}

fn matrix_summary(m: &TransferMatrix) -> Value {
    json!({
        "diagonal_mean": m.diagonal_mean(),
        "off_diagonal_mean": m.off_diagonal_mean(),
        "mismatch_penalty": m.mismatch_penalty(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_matrix(ctx: &mut Ctx, dir: &str, m: &TransferMatrix) -> Result<()> {
    ctx.json(&format!("{dir}/matrix.json"), m)?;
    ctx.text(&format!("{dir}/matrix.csv"), m.to_csv())?;
    ctx.text(&format!("{dir}/grid_mean.csv"), m.to_grid_csv(false))?;
    ctx.text(&format!("{dir}/grid_median.csv"), m.to_grid_csv(true))
}

fn fit_csv(fit: &RegressionFit) -> String {
    fit.to_csv()
}

/// One view of the analysis layer: a space with a pooling scheme.
struct View<'a> {
    name: String,
    space: Space,
    word: bool,
    views: Views<'a>,
}

/// Runs every enabled evaluation and writes `results/` under the output
/// directory, building missing stores first.
pub fn cmd_evaluate(cfg: &PipelineConfig, exec: Execution) -> Result<EvaluateReport> {
    cfg.validate()?;
    let out = cfg.out_dir();
    let _lock = OutputLock::acquire(&out)?;
    let root = out.join("results");
    if root.exists() {
        fs::remove_dir_all(&root).map_err(io_err(&root))?;
    }
    fs::create_dir_all(&root).map_err(io_err(&root))?;

    let t = cfg.evaluate;
    let layer = cfg.analysis_layer();
    let mut prov = Provenance::new("evaluate", cfg);
    let mut ctx = Ctx {
        cfg,
        root,
        exec,
        report: EvaluateReport::default(),
    };
    let mut summary: BTreeMap<String, Value> = BTreeMap::new();
    summary.insert("analysis_layer".into(), json!(layer));

    let any = t.needs_trials() || t.forced_choice || t.same_word || t.layer_sweep || t.pca;
    if any {
        let needed = needed_stores(cfg);
        if needed.iter().any(|p| !p.is_file()) {
            log::info!("building missing embedding stores");
            embed(cfg, exec)?;
        }
        prov.inputs(cfg, &needed)?;
        let (corpus, files) = load_corpus(&cfg.manifest_path(&cfg.paths.eval_manifest, layer))?;
        prov.inputs(cfg, &files)?;
        let stimuli = load_stimuli(cfg, &corpus.tokens)?;
        prov.inputs(cfg, &stimuli.files)?;
        drop(corpus);
        write_stimuli(&mut ctx, &stimuli)?;

        let freq = match &cfg.paths.frequencies {
            Some(f) if t.regression => {
                let p = cfg.resolve(f);
                prov.inputs(cfg, std::slice::from_ref(&p))?;
                Some(FrequencyTable::read(&p)?)
            }
            _ => None,
        };

        for label in ["analogy", "forced-choice", "same-word", "layer-sweep"] {
            prov.seed(label, cfg.eval_config(label).seed);
        }

        let mut stores: BTreeMap<(Space, Pooling), EmbeddingStore> = BTreeMap::new();
        for space in cfg.space.spaces() {
            let mut poolings = Vec::new();
            if cfg.pooling.word() {
                poolings.push(Pooling::Word);
            }
            if cfg.pooling.phoneme() {
                poolings.extend([Pooling::Constancy, Pooling::Final]);
            }
            for p in poolings {
                stores.insert((space, p), read_store_file(&store_path(&out, space, layer, p))?);
            }
        }
        let mut views = Vec::new();
        for space in cfg.space.spaces() {
            if let Some(s) = stores.get(&(space, Pooling::Word)) {
                views.push(View {
                    name: format!("{}-word", space.label()),
                    space,
                    word: true,
                    views: Views::Word(s),
                });
            }
            if let (Some(c), Some(f)) = (stores.get(&(space, Pooling::Constancy)), stores.get(&(space, Pooling::Final))) {
                views.push(View {
                    name: format!("{}-phoneme", space.label()),
                    space,
                    word: false,
                    views: Views::phoneme(c, f)?,
                });
            }
        }

        let mut view_summaries: BTreeMap<String, Value> = BTreeMap::new();
        let mut word_fits: BTreeMap<Space, RegressionFit> = BTreeMap::new();
        let mut word_ranks: BTreeMap<Space, Vec<f64>> = BTreeMap::new();
        for v in &views {
            let s = evaluate_view(&mut ctx, v, &stimuli, freq.as_ref(), &mut word_fits, &mut word_ranks)?;
            view_summaries.insert(v.name.clone(), s);
        }
        summary.insert("views".into(), json!(view_summaries));

        if t.regression {
            if let (Some(raw), Some(probe)) = (word_fits.get(&Space::Raw), word_fits.get(&Space::Probe)) {
                let cmp = compare_interactions(raw, probe);
                let mut csv = String::from("term,raw,probe,difference\n");
                for c in &cmp {
                    let _ = writeln!(csv, "{},{},{},{}", c.term, c.strength_a, c.strength_b, c.difference);
                }
                ctx.json("regression/interaction_comparison.json", &cmp)?;
                ctx.text("regression/interaction_comparison.csv", csv)?;
            }
            if let (Some(raw), Some(probe)) = (word_ranks.get(&Space::Raw), word_ranks.get(&Space::Probe)) {
                let r = welch_t(raw, probe).map_err(|e| PipelineError::Failed(e.to_string()));
                if let Some(w) = ctx.soft("raw vs probe t-test", r)? {
                    ctx.json("regression/space_ttest.json", &json!({"groups": ["raw-word", "probe-word"], "pooling": "per-trial", "result": w}))?;
                    summary.insert("space_ttest".into(), json!(w));
                }
            }
        }

        if t.layer_sweep {
            let r = sweep(&mut ctx, &stimuli.pairs, &mut prov)?;
            if let Some(points) = ctx.soft("layer sweep", r)? {
                summary.insert("layer_sweep".into(), json!(points));
            }
        }
    }

    summary.insert("failures".into(), json!(ctx.report.failures));
    ctx.json("summary.json", &summary)?;
    prov.write(&ctx.path("provenance.json"))?;
    ctx.note("provenance.json");
    ctx.report.files.sort();
    Ok(ctx.report)
}

fn needed_stores(cfg: &PipelineConfig) -> Vec<PathBuf> {
    let out = cfg.out_dir();
    let layer = cfg.analysis_layer();
    let mut v = Vec::new();
    for space in cfg.space.spaces() {
        for &l in &cfg.layers {
            v.push(store_path(&out, space, l, Pooling::Word));
        }
        if cfg.pooling.phoneme() {
            v.push(store_path(&out, space, layer, Pooling::Constancy));
            v.push(store_path(&out, space, layer, Pooling::Final));
        }
    }
    v
}

fn write_stimuli(ctx: &mut Ctx, s: &Stimuli) -> Result<()> {
    let mut csv = String::from("pair,base,inflected,inflection,allomorph,base_form,inflected_form\n");
    for p in s.pairs.iter().chain(&s.false_friends) {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            p.label(),
            p.base.word,
            p.inflected.word,
            p.inflection,
            p.allomorph,
            p.base.form,
            p.inflected.form
        );
    }
    ctx.text("stimuli/pairs.csv", csv)?;
    let mut sk = String::from("pair,reason\n");
    for (l, r) in &s.skipped {
        let _ = writeln!(sk, "{l},\"{}\"", r.replace('"', "'"));
    }
    ctx.text("stimuli/skipped.csv", sk)
}

fn evaluate_view(
    ctx: &mut Ctx,
    v: &View,
    stimuli: &Stimuli,
    freq: Option<&FrequencyTable>,
    word_fits: &mut BTreeMap<Space, RegressionFit>,
    word_ranks: &mut BTreeMap<Space, Vec<f64>>,
) -> Result<Value> {
    let t = ctx.cfg.evaluate;
    let name = v.name.as_str();
    let mut s: BTreeMap<&str, Value> = BTreeMap::new();
    let exec = ctx.exec;

    if t.needs_trials() {
        let mut pairs: Vec<InflectionPair> = stimuli.pairs.clone();
        if t.false_friends {
            pairs.extend(stimuli.false_friends.iter().cloned());
        }
        let ecfg = ctx.cfg.eval_config("analogy");
        let r = run_trials(&pairs, &v.views, &ecfg, exec).map_err(PipelineError::from);
        if let Some(trials) = ctx.soft(&format!("{name} trials"), r)? {
            let real: Vec<TrialOutcome> = trials.iter().filter(|x| is_real(x)).cloned().collect();
            if t.morphology {
                let m = transfer_matrix(&real, &categories_inflection(), inflection_category);
                ctx.jsonl(&format!("morphology/{name}/trials.jsonl"), &real)?;
                write_matrix(ctx, &format!("morphology/{name}"), &m)?;
                s.insert("morphology", matrix_summary(&m));
            }
            if t.allomorphy {
                let m = transfer_matrix(&real, &categories_allomorph(), allomorph_category);
                write_matrix(ctx, &format!("allomorphy/{name}"), &m)?;
                s.insert("allomorphy", matrix_summary(&m));
            }
            if t.false_friends {
                let ff: Vec<TrialOutcome> = trials.iter().filter(|x| !is_real(x)).cloned().collect();
                let mut cats = categories_inflection();
                cats.push("FF".into());
                let m = transfer_matrix(&trials, &cats, inflection_category);
                ctx.jsonl(&format!("false_friends/{name}/trials.jsonl"), &ff)?;
                write_matrix(ctx, &format!("false_friends/{name}"), &m)?;
                let cell = |a: &str, b: &str| m.cell(a, b).and_then(|c| c.mean);
                s.insert(
                    "false_friends",
                    json!({
                        "NNS->FF": cell("NNS", "FF"),
                        "VBZ->FF": cell("VBZ", "FF"),
                        "FF->NNS": cell("FF", "NNS"),
                        "FF->VBZ": cell("FF", "VBZ"),
                        "FF->FF": cell("FF", "FF"),
                    }),
                );
            }
            if t.regression {
                if let Some(freq) = freq {
                    let out = regression(ctx, name, &real, freq)?;
                    if let Some(fit) = out.0 {
                        if v.word {
                            word_fits.insert(v.space, fit);
                        }
                    }
                    s.insert("regression", out.1);
                }
                if v.word {
                    word_ranks.insert(v.space, real.iter().map(|x| x.rank as f64).collect());
                }
            }
        }
    }

    if t.forced_choice {
        let ecfg = ctx.cfg.eval_config("forced-choice");
        let r = forced_choice(&stimuli.pairs, &stimuli.triples, &v.views, &ecfg, exec).map_err(PipelineError::from);
        if let Some((results, skipped)) = ctx.soft(&format!("{name} forced choice"), r)? {
            let prefs: Vec<f64> = results.iter().map(|r| r.preference).collect();
            let cdf = preference_cdf(&prefs);
            let mut csv = String::from("triple,consistent,inconsistent,draws,consistent_choices,preference\n");
            for r in &results {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    r.triple,
                    r.consistent.join("/"),
                    r.inconsistent.join("/"),
                    r.draws,
                    r.consistent_choices,
                    r.preference
                );
            }
            let mut cdf_csv = String::from("preference,cumulative_fraction\n");
            for (x, f) in &cdf {
                let _ = writeln!(cdf_csv, "{x},{f}");
            }
            ctx.json(&format!("forced_choice/{name}/results.json"), &json!({"results": results, "skipped": skipped}))?;
            ctx.text(&format!("forced_choice/{name}/preferences.csv"), csv)?;
            ctx.text(&format!("forced_choice/{name}/cdf.csv"), cdf_csv)?;
            ctx.json(&format!("forced_choice/{name}/cdf.json"), &cdf)?;
            let majority = prefs.iter().filter(|&&p| p >= 0.5).count();
            s.insert(
                "forced_choice",
                json!({"triples": results.len(), "skipped": skipped.len(), "at_least_half": majority, "cdf": cdf}),
            );
        }
    }

    if t.same_word {
        let ecfg = ctx.cfg.eval_config("same-word");
        let r = same_word_eval(&stimuli.pairs, &v.views, &ecfg, exec).map_err(PipelineError::from);
        if let Some((outcomes, summary)) = ctx.soft(&format!("{name} same-word"), r)? {
            ctx.jsonl(&format!("same_word/{name}/outcomes.jsonl"), &outcomes)?;
            ctx.json(&format!("same_word/{name}/summary.json"), &summary)?;
            s.insert("same_word", json!({"noun_mean": summary.noun_mean, "verb_mean": summary.verb_mean}));
        }
    }

    if t.pca && v.word {
        let store = v.views.ranking();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for p in &stimuli.pairs {
            let (a, b) = (store.word_rows(&p.base.word), store.word_rows(&p.inflected.word));
            for (&ra, &rb) in a.iter().zip(b) {
                rows.push((ra, rb));
                labels.push(p);
            }
        }
        let r = pca_project(store, 2, &rows).map_err(PipelineError::from);
        if let Some(pca) = ctx.soft(&format!("{name} pca"), r)? {
            let mut csv = String::from("pair,inflection,allomorph,pc1,pc2\n");
            for (p, d) in labels.iter().zip(&pca.differences) {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    p.label(),
                    p.inflection,
                    p.allomorph,
                    d.first().copied().unwrap_or(0.0),
                    d.get(1).copied().unwrap_or(0.0)
                );
            }
            ctx.text(&format!("pca/{name}/differences.csv"), csv)?;
            ctx.json(&format!("pca/{name}/basis.json"), &pca)?;
            s.insert("pca", json!({"explained_ratio": pca.explained_ratio, "mean_direction": pca.mean_direction}));
        }
    }
    Ok(json!(s))
}

/// Fits the categorical model four ways (full or S-vs-rest allomorph coding,
/// ranks scaled by 1/1000 or raw) and runs the noun/verb t-tests. Returns
/// the scaled S-vs-rest fit used for interaction comparisons.
fn regression(
    ctx: &mut Ctx,
    name: &str,
    trials: &[TrialOutcome],
    freq: &FrequencyTable,
) -> Result<(Option<RegressionFit>, Value)> {
    let rows: Vec<TrialRow> = trials.iter().filter_map(|t| TrialRow::from_trial(t, freq)).collect();
    if rows.len() < trials.len() {
        log::info!("{name}: {} trials lack frequencies", trials.len() - rows.len());
    }
    let dir = format!("regression/{name}");
    let mut summary = BTreeMap::new();
    let mut primary = None;
    for (coding, ctag) in [(AllomorphCoding::Full, "full"), (AllomorphCoding::SVsRest, "s_vs_rest")] {
        for (scale, stag) in [(1000.0, "scaled"), (1.0, "raw")] {
            let r = build_design(&rows, coding)
                .and_then(|d| {
                    let y: Vec<f64> = rows.iter().map(|r| r.rank / scale).collect();
                    fit_ols(&d, &y)
                })
                .map_err(|e| PipelineError::Failed(e.to_string()));
            if let Some(fit) = ctx.soft(&format!("{name} regression {ctag}/{stag}"), r)? {
                ctx.text(&format!("{dir}/fit_{ctag}_{stag}.csv"), fit_csv(&fit))?;
                summary.insert(format!("{ctag}_{stag}_r_squared"), json!(fit.r_squared));
                if coding == AllomorphCoding::SVsRest && scale != 1.0 {
                    let strengths = interaction_strength(&fit);
                    let mut csv = String::from("term,strength\n");
                    for (term, v) in &strengths {
                        let _ = writeln!(csv, "{term},{v}");
                    }
                    ctx.text(&format!("{dir}/interactions.csv"), csv)?;
                    ctx.json(&format!("{dir}/interactions.json"), &strengths)?;
                    primary = Some(fit);
                }
            }
        }
    }

    // Noun vs verb targets, pooled per trial and per target pair.
    let by = |inf: Inflection| -> Vec<f64> {
        trials.iter().filter(|t| t.inflection_to == inf).map(|t| t.rank as f64).collect()
    };
    let per_pair = |inf: Inflection| -> Vec<f64> {
        let mut m: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for t in trials.iter().filter(|t| t.inflection_to == inf) {
            m.entry(t.target.as_str()).or_default().push(t.rank as f64);
        }
        m.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect()
    };
    let mut tests = BTreeMap::new();
    for (pool, a, b) in [
        ("per-trial", by(Inflection::Nns), by(Inflection::Vbz)),
        ("per-target-pair", per_pair(Inflection::Nns), per_pair(Inflection::Vbz)),
    ] {
        let r = welch_t(&a, &b).map_err(|e| PipelineError::Failed(e.to_string()));
        if let Some(w) = ctx.soft(&format!("{name} noun/verb t-test ({pool})"), r)? {
            tests.insert(pool, json!({"nouns": a.len(), "verbs": b.len(), "result": w}));
        }
    }
    ctx.json(&format!("{dir}/ttests.json"), &tests)?;
    summary.insert("noun_verb_ttests".into(), json!(tests));
    summary.insert("rows".into(), json!(rows.len()));
    Ok((primary, json!(summary)))
}

fn sweep(ctx: &mut Ctx, pairs: &[InflectionPair], prov: &mut Provenance) -> Result<Result<Vec<Value>>> {
    let cfg = ctx.cfg;
    let out = cfg.out_dir();
    let mut layers = cfg.layers.clone();
    layers.sort_unstable();
    let ecfg = cfg.eval_config("layer-sweep");
    let mut csv = String::from("space,layer,n_trials,mean_rank,median_rank\n");
    let mut all = Vec::new();
    for space in cfg.space.spaces() {
        let mut stores = Vec::new();
        for &l in &layers {
            let p = store_path(&out, space, l, Pooling::Word);
            prov.inputs(cfg, std::slice::from_ref(&p))?;
            stores.push((l, read_store_file(&p)?));
        }
        let per_layer: Vec<(u16, Views)> = stores.iter().map(|(l, s)| (*l, Views::Word(s))).collect();
        let points: Vec<LayerPoint> = match layer_sweep(&per_layer, pairs, &ecfg, ctx.exec) {
            Ok(p) => p,
            Err(e) => return Ok(Err(e.into())),
        };
        for p in &points {
            let _ = writeln!(csv, "{},{},{},{},{}", space.label(), p.layer, p.n_trials, opt(p.mean_rank), opt(p.median_rank));
        }
        all.push(json!({"space": space.label(), "points": points}));
    }
    ctx.text("layer_sweep/series.csv", csv)?;
    ctx.json("layer_sweep/series.json", &all)?;
    Ok(Ok(all))
}
