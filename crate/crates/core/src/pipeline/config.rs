use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::analogy::EvalConfig;
use crate::embeddings::Space;
use crate::probe::TrainConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceSelection {
    Raw,
    Probe,
    #[default]
    Both,
}

impl SpaceSelection {
    pub fn spaces(self) -> Vec<Space> {
        match self {
            SpaceSelection::Raw => vec![Space::Raw],
            SpaceSelection::Probe => vec![Space::Probe],
            SpaceSelection::Both => vec![Space::Raw, Space::Probe],
        }
    }
}

impl std::str::FromStr for SpaceSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "raw" => Ok(SpaceSelection::Raw),
            "probe" => Ok(SpaceSelection::Probe),
            "both" => Ok(SpaceSelection::Both),
            _ => Err(format!("unknown space {s:?} (raw, probe or both)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolingSelection {
    #[default]
    Word,
    Phoneme,
    Both,
}

impl PoolingSelection {
    pub fn word(self) -> bool {
        self != PoolingSelection::Phoneme
    }

    pub fn phoneme(self) -> bool {
        self != PoolingSelection::Word
    }
}

/// Input locations. Manifest paths may contain a `{layer}` placeholder;
/// relative paths resolve against the configuration file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub train_manifest: String,
    pub validation_manifest: String,
    pub eval_manifest: String,
    #[serde(default)]
    pub frequencies: Option<PathBuf>,
    #[serde(default)]
    pub inventory: Option<PathBuf>,
    #[serde(default)]
    pub curation: Option<PathBuf>,
    #[serde(default)]
    pub forced_choice: Option<PathBuf>,
    #[serde(default)]
    pub false_friends: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    pub morphology: bool,
    pub allomorphy: bool,
    pub false_friends: bool,
    pub forced_choice: bool,
    pub same_word: bool,
    pub layer_sweep: bool,
    pub regression: bool,
    pub pca: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles::all(true)
    }
}

impl Toggles {
    pub fn all(on: bool) -> Self {
        Toggles {
            morphology: on,
            allomorphy: on,
            false_friends: on,
            forced_choice: on,
            same_word: on,
            layer_sweep: on,
            regression: on,
            pca: on,
        }
    }

    pub(crate) fn needs_trials(&self) -> bool {
        self.morphology || self.allomorphy || self.false_friends || self.regression
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalogySettings {
    pub samples: usize,
    pub baseline: bool,
    pub max_trials: Option<usize>,
}

impl Default for AnalogySettings {
    fn default() -> Self {
        AnalogySettings {
            samples: 20,
            baseline: true,
            max_trials: None,
        }
    }
}

fn default_depth() -> u16 {
    12
}

/// The whole run, read from one TOML document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub layers: Vec<u16>,
    /// Layer for every evaluation except the sweep; defaults to the first
    /// entry of `layers`.
    #[serde(default)]
    pub analysis_layer: Option<u16>,
    /// Highest valid layer index of the model.
    #[serde(default = "default_depth")]
    pub model_depth: u16,
    #[serde(default)]
    pub space: SpaceSelection,
    #[serde(default)]
    pub pooling: PoolingSelection,
    pub paths: Paths,
    #[serde(default)]
    pub probe: TrainConfig,
    #[serde(default)]
    pub analogy: AnalogySettings,
    #[serde(default)]
    pub evaluate: Toggles,
    #[serde(skip)]
    pub(crate) base_dir: PathBuf,
}

/// Command-line values that replace file values.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub layer: Option<u16>,
    pub space: Option<SpaceSelection>,
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(l) = o.layer {
            self.layers = vec![l];
            self.analysis_layer = Some(l);
        }
        if let Some(s) = o.space {
            self.space = s;
        }
        if let Some(out) = &o.out {
            // Flag paths are relative to the working directory, not the file.
            self.paths.out = std::path::absolute(out).unwrap_or_else(|_| out.clone());
        }
    }

    /// Settings for a corpus written by [`crate::synth::write_corpus`] into
    /// the configuration's own directory, sized to run in seconds.
    pub fn fixture(layers: &[u16], seed: u64) -> Self {
        let pattern = crate::synth::SynthCorpus::manifest_pattern;
        PipelineConfig {
            seed,
            layers: layers.to_vec(),
            analysis_layer: None,
            model_depth: default_depth(),
            space: SpaceSelection::Both,
            pooling: PoolingSelection::Both,
            paths: Paths {
                train_manifest: pattern("train"),
                validation_manifest: pattern("validation"),
                eval_manifest: pattern("all"),
                frequencies: Some(PathBuf::from("frequencies.tsv")),
                inventory: None,
                curation: None,
                forced_choice: None,
                false_friends: None,
                out: PathBuf::from("run"),
            },
            probe: TrainConfig {
                d_out: 8,
                batch_size: 64,
                max_epochs: 8,
                learning_rate: 0.01,
                validation_triples: 256,
                ..TrainConfig::default()
            },
            analogy: AnalogySettings {
                samples: 10,
                baseline: true,
                max_trials: Some(400),
            },
            evaluate: Toggles::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn analysis_layer(&self) -> u16 {
        self.analysis_layer.or(self.layers.first().copied()).unwrap_or(0)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn manifest_path(&self, pattern: &str, layer: u16) -> PathBuf {
        self.resolve(Path::new(&pattern.replace("{layer}", &layer.to_string())))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.paths.out)
    }

    pub(crate) fn eval_config(&self, label: &str) -> EvalConfig {
        EvalConfig {
            samples: self.analogy.samples,
            seed: crate::seed::derive(self.seed, label),
            baseline: self.analogy.baseline,
            max_trials: self.analogy.max_trials,
        }
    }

    /// Schema checks that do not touch the file system.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.layers.is_empty() {
            return bad("`layers` is empty".into());
        }
        let mut sorted = self.layers.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.layers.len() {
            return bad("`layers` has duplicates".into());
        }
        if let Some(l) = self.layers.iter().find(|&&l| l > self.model_depth) {
            return bad(format!("layer {l} exceeds model depth {}", self.model_depth));
        }
        let a = self.analysis_layer();
        if !self.layers.contains(&a) {
            return bad(format!("analysis layer {a} is not in `layers`"));
        }
        if self.analogy.samples == 0 {
            return bad("`analogy.samples` must be positive".into());
        }
        if self.evaluate.regression && self.paths.frequencies.is_none() {
            return bad("regression needs `paths.frequencies`".into());
        }
        Ok(())
    }

    /// Schema checks plus existence of every referenced input.
    pub fn validate(&self) -> Result<()> {
        self.check()?;
        let mut missing = Vec::new();
        for &l in &self.layers {
            for pat in [&self.paths.train_manifest, &self.paths.validation_manifest, &self.paths.eval_manifest] {
                let p = self.manifest_path(pat, l);
                if !p.is_file() {
                    missing.push(p);
                }
            }
        }
        let p = &self.paths;
        for f in [&p.frequencies, &p.inventory, &p.curation, &p.forced_choice, &p.false_friends]
            .into_iter()
            .flatten()
        {
            let r = self.resolve(f);
            if !r.is_file() {
                missing.push(r);
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            let list: Vec<String> = missing.iter().map(|p| p.display().to_string()).collect();
            Err(PipelineError::Config(format!("missing inputs: {}", list.join(", "))))
        }
    }

    /// SHA-256 of the effective configuration, excluding the output
    /// location so relocated runs share a hash.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut c = self.clone();
        c.paths.out = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }
}
