use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use super::{
    probe_path, store_path, write_jsonl, OutputLock, PipelineConfig, PipelineError, Provenance,
    Result,
};
use crate::corpus_io::{Corpus, RunManifest, WordToken};
use crate::embeddings::{build_phoneme_stores, build_store, write_store_file, Pooling, Space};
use crate::probe::{read_probe_file, train_probe, write_probe_file, FramePool, ProbeParams};
use crate::seed::derive;
use crate::stimuli::{
    build_pairs, default_false_friends, default_forced_choice, load_false_friends,
    load_forced_choice, select_unambiguous, validate_materials, Curation, FeatureInventory,
    ForcedChoiceTriple, InflectionPair, Lexicon, MaterialCheck, PhonForm,
};
use crate::Execution;

/// Everything the evaluations need besides embeddings.
#[derive(Clone, Debug)]
pub struct Stimuli {
    pub inventory: FeatureInventory,
    pub pairs: Vec<InflectionPair>,
    pub skipped: Vec<(String, String)>,
    pub false_friends: Vec<InflectionPair>,
    pub triples: Vec<ForcedChoiceTriple>,
    pub files: Vec<PathBuf>,
}

impl Stimuli {
    /// Inflected word → base form, for constancy pooling.
    pub fn bases(&self) -> BTreeMap<String, PhonForm> {
        self.pairs
            .iter()
            .chain(&self.false_friends)
            .map(|p| (p.inflected.word.clone(), p.base.form.clone()))
            .collect()
    }
}

/// Selects inflection pairs from `tokens` and loads the curated materials
/// named in the configuration, falling back to the bundled lists.
pub fn load_stimuli(cfg: &PipelineConfig, tokens: &[WordToken]) -> Result<Stimuli> {
    let p = &cfg.paths;
    let mut files = Vec::new();
    let mut track = |f: &Option<PathBuf>| {
        f.as_ref().map(|f| {
            let r = cfg.resolve(f);
            files.push(r.clone());
            r
        })
    };
    let inventory = match track(&p.inventory) {
        Some(f) => FeatureInventory::read(&f)?,
        None => FeatureInventory::default(),
    };
    let curation = match track(&p.curation) {
        Some(f) => Curation::read(&f)?,
        None => Curation::bundled(),
    };
    let triples = match track(&p.forced_choice) {
        Some(f) => load_forced_choice(&f, &inventory)?,
        None => default_forced_choice(&inventory)?,
    };
    let false_friends = match track(&p.false_friends) {
        Some(f) => load_false_friends(&f, &inventory)?,
        None => default_false_friends(&inventory)?,
    };
    let sets = select_unambiguous(tokens, &curation);
    let lexicon = Lexicon::from_tokens(tokens, &inventory);
    let built = build_pairs(&sets, &lexicon, &inventory, &curation);
    log::info!(
        "stimuli: {} inflection pairs, {} skipped, {} false friends, {} forced-choice triples",
        built.pairs.len(),
        built.skipped.len(),
        false_friends.len(),
        triples.len()
    );
    Ok(Stimuli {
        inventory,
        pairs: built.pairs,
        skipped: built.skipped,
        false_friends,
        triples,
        files,
    })
}

pub(crate) fn load_corpus(path: &std::path::Path) -> Result<(Corpus, Vec<PathBuf>)> {
    let m = RunManifest::read(path)?;
    let corpus = m.load()?;
    let mut files = vec![path.to_path_buf()];
    files.extend(m.input_files());
    Ok((corpus, files))
}

/// Trains one probe per configured layer and writes
/// `probes/probe-layer-{L}.s3mp` with a JSON Lines epoch log beside it.
pub fn cmd_train(cfg: &PipelineConfig, exec: Execution) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let out = cfg.out_dir();
    let _lock = OutputLock::acquire(&out)?;
    let mut prov = Provenance::new("train", cfg);
    let mut written = Vec::new();
    let mut failures = Vec::new();
    for &layer in &cfg.layers {
        let result = (|| -> Result<PathBuf> {
            let (train, f1) = load_corpus(&cfg.manifest_path(&cfg.paths.train_manifest, layer))?;
            let (val, f2) = load_corpus(&cfg.manifest_path(&cfg.paths.validation_manifest, layer))?;
            prov.inputs(cfg, &f1)?;
            prov.inputs(cfg, &f2)?;
            let mut tcfg = cfg.probe.clone();
            tcfg.seed = derive(cfg.seed, &format!("train/layer-{layer}"));
            prov.seed(&format!("train/layer-{layer}"), tcfg.seed);
            let outcome = train_probe(
                &FramePool::from_corpus(&train),
                &FramePool::from_corpus(&val),
                layer,
                &tcfg,
                exec,
            )?;
            let path = probe_path(&out, layer);
            super::ensure_parent(&path)?;
            write_probe_file(&path, &outcome.params)?;
            write_jsonl(&path.with_extension("log.jsonl"), &outcome.log)?;
            let meta = &outcome.params.meta;
            log::info!(
                "layer {layer}: {} epochs, best epoch {}, validation loss {:.5}",
                meta.epochs_run,
                meta.best_epoch,
                meta.final_validation_loss
            );
            Ok(path)
        })();
        match result {
            Ok(p) => written.push(p),
            Err(e) => {
                log::error!("layer {layer}: {e}");
                failures.push(format!("layer {layer}: {e}"));
            }
        }
    }
    prov.write(&out.join("probes/provenance.json"))?;
    if failures.is_empty() {
        Ok(written)
    } else {
        Err(PipelineError::Failed(format!("training failed: {}", failures.join("; "))))
    }
}

pub(crate) fn load_probe(cfg: &PipelineConfig, layer: u16) -> Result<ProbeParams> {
    let path = probe_path(&cfg.out_dir(), layer);
    if !path.is_file() {
        return Err(PipelineError::Failed(format!(
            "no probe for layer {layer} at {}; run `train` first",
            path.display()
        )));
    }
    Ok(read_probe_file(&path)?)
}

/// Builds word stores for every layer (the layer sweep needs them) and,
/// when phoneme pooling is enabled, phoneme stores at the analysis layer.
pub fn cmd_embed(cfg: &PipelineConfig, exec: Execution) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let _lock = OutputLock::acquire(&cfg.out_dir())?;
    embed(cfg, exec)
}

pub(crate) fn embed(cfg: &PipelineConfig, exec: Execution) -> Result<Vec<PathBuf>> {
    let out = cfg.out_dir();
    let mut prov = Provenance::new("embed", cfg);
    let mut written = Vec::new();
    let analysis = cfg.analysis_layer();
    for &layer in &cfg.layers {
        let (corpus, files) = load_corpus(&cfg.manifest_path(&cfg.paths.eval_manifest, layer))?;
        prov.inputs(cfg, &files)?;
        let stimuli = load_stimuli(cfg, &corpus.tokens)?;
        prov.inputs(cfg, &stimuli.files)?;
        let bases = stimuli.bases();
        for space in cfg.space.spaces() {
            let probe = match space {
                Space::Raw => None,
                Space::Probe => {
                    prov.inputs(cfg, &[super::probe_path(&out, layer)])?;
                    Some(load_probe(cfg, layer)?)
                }
            };
            {
                let b = build_store(&corpus, probe.as_ref(), Pooling::Word, &bases, exec)?;
                if !b.skipped.is_empty() {
                    log::info!("{}: skipped {} tokens", space.tag(layer), b.skipped.len());
                }
                let p = store_path(&out, space, layer, Pooling::Word);
                super::ensure_parent(&p)?;
                write_store_file(&p, &b.store)?;
                written.push(p);
            }
            if cfg.pooling.phoneme() && layer == analysis {
                let (con, fin, skipped) = build_phoneme_stores(&corpus, probe.as_ref(), &bases, exec)?;
                if !skipped.is_empty() {
                    log::info!("{} phoneme pooling: skipped {} tokens", space.tag(layer), skipped.len());
                }
                for (pooling, store) in [(Pooling::Constancy, con), (Pooling::Final, fin)] {
                    let p = store_path(&out, space, layer, pooling);
                    super::ensure_parent(&p)?;
                    write_store_file(&p, &store)?;
                    written.push(p);
                }
            }
        }
    }
    prov.write(&out.join("stores/provenance.json"))?;
    Ok(written)
}

#[derive(Clone, Debug, Serialize)]
pub struct StimulusReport {
    pub checks: Vec<MaterialCheck>,
    pub pairs: Vec<String>,
    pub skipped: Vec<(String, String)>,
}

impl StimulusReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

/// Checks the curated materials against the classifier and lists the
/// inflection pairs the evaluation corpus yields.
pub fn cmd_validate_stimuli(cfg: &PipelineConfig) -> Result<StimulusReport> {
    cfg.validate()?;
    let (corpus, _) = load_corpus(&cfg.manifest_path(&cfg.paths.eval_manifest, cfg.analysis_layer()))?;
    let s = load_stimuli(cfg, &corpus.tokens)?;
    let checks = validate_materials(&s.triples, &s.false_friends, &s.inventory);
    Ok(StimulusReport {
        pairs: s.pairs.iter().map(|p| format!("{} {} [{}]", p.label(), p.inflection, p.allomorph)).collect(),
        skipped: s.skipped,
        checks,
    })
}
