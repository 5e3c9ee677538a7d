//! Synthetic fixtures with planted structure: clustered frame pools for
//! probe training and a small aligned corpus for end-to-end runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus_io::{
    io_err, write_activation_file, write_alignments, ActivationMatrix, CorpusError, FrequencyTable,
    ManifestEntry, PhonemeSpan, RunManifest, WordToken,
};
use crate::probe::FramePool;
use crate::seed::{stage_rng, StageRng};
use crate::stimuli::{
    classify_allomorph, default_false_friends, default_forced_choice, Allomorph, FeatureInventory,
    PhonForm,
};

/// Word-type clusters in the first `signal_dims` coordinates, with
/// type-independent nuisance variance in the rest.
#[derive(Clone, Debug)]
pub struct ClusterSpec {
    pub types: usize,
    pub tokens_per_type: usize,
    pub frames_per_token: usize,
    pub dim: usize,
    pub signal_dims: usize,
    /// Within-type standard deviation in the signal coordinates.
    pub noise: f64,
    /// Standard deviation of the nuisance coordinates.
    pub nuisance: f64,
    pub seed: u64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec {
            types: 20,
            tokens_per_type: 4,
            frames_per_token: 3,
            dim: 32,
            signal_dims: 8,
            noise: 0.3,
            nuisance: 2.0,
            seed: 0,
        }
    }
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

impl ClusterSpec {
    /// Draws one split. Centroids depend only on `seed`; token noise also
    /// depends on `split`, and utterance ids are prefixed with it.
    pub fn pool(&self, split: &str) -> FramePool {
        let mut crng = stage_rng(self.seed, "synth/centroids");
        let centroids: Vec<Vec<f64>> = (0..self.types)
            .map(|_| (0..self.signal_dims).map(|_| gaussian(&mut crng)).collect())
            .collect();
        let mut rng = stage_rng(self.seed, &format!("synth/pool/{split}"));
        let mut groups = Vec::with_capacity(self.types);
        for (t, c) in centroids.iter().enumerate() {
            let mut toks = Vec::with_capacity(self.tokens_per_type);
            for _ in 0..self.tokens_per_type {
                let mut f = Vec::with_capacity(self.frames_per_token * self.dim);
                for _ in 0..self.frames_per_token {
                    for d in 0..self.dim {
                        let v = if d < self.signal_dims {
                            c[d] + self.noise * gaussian(&mut rng)
                        } else {
                            self.nuisance * gaussian(&mut rng)
                        };
                        f.push(v as f32);
                    }
                }
                toks.push(f);
            }
            groups.push((format!("w{t:04}"), toks));
        }
        let n_utt = self.types * self.tokens_per_type;
        FramePool::from_groups(self.dim, groups)
            .with_utterances((0..n_utt).map(|i| format!("{split}-{i:05}")))
    }
}

/// Shorthand for a default-shaped clustered pool.
pub fn clustered_pool(
    types: usize,
    tokens_per_type: usize,
    frames_per_token: usize,
    dim: usize,
    noise: f64,
    seed: u64,
    split: &str,
) -> FramePool {
    ClusterSpec {
        types,
        tokens_per_type,
        frames_per_token,
        dim,
        signal_dims: (dim / 4).max(1),
        noise,
        seed,
        ..ClusterSpec::default()
    }
    .pool(split)
}

/// Shape of a planted, fully aligned corpus written to disk in the native
/// formats. Inflected forms sit at `base + inflection offset + allomorph
/// offset`, so every evaluation has structure to find.
#[derive(Clone, Debug)]
pub struct CorpusSpec {
    pub nouns: usize,
    pub verbs: usize,
    pub fillers: usize,
    pub tokens_per_word: usize,
    pub words_per_utterance: usize,
    pub dim: usize,
    pub layers: Vec<u16>,
    pub hop_us: u32,
    /// Per-frame noise at layer 0.
    pub noise: f64,
    /// Extra per-frame noise for each layer step.
    pub layer_noise: f64,
    /// Also emit tokens for the bundled false-friend and forced-choice words.
    pub materials: bool,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            nouns: 12,
            verbs: 12,
            fillers: 8,
            tokens_per_word: 4,
            words_per_utterance: 8,
            dim: 24,
            layers: vec![0, 1],
            hop_us: 20_000,
            noise: 0.3,
            layer_noise: 0.2,
            materials: true,
            seed: 0,
        }
    }
}

/// Paths of a written fixture, relative names resolved against `root`.
#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub root: PathBuf,
    pub layers: Vec<u16>,
    pub n_utterances: usize,
    pub n_tokens: usize,
}

impl SynthCorpus {
    /// Manifest for `split` (`train`, `validation` or `all`), with the
    /// layer number left as a `{layer}` placeholder.
    pub fn manifest_pattern(split: &str) -> String {
        format!("manifests/{split}-layer-{{layer}}.json")
    }

    pub fn manifest(&self, split: &str, layer: u16) -> PathBuf {
        self.root.join(manifest_name(split, layer))
    }

    pub fn frequencies(&self) -> PathBuf {
        self.root.join("frequencies.tsv")
    }
}

struct SynthWord {
    word: String,
    tag: &'static str,
    phones: Vec<String>,
    vector: Vec<f64>,
}

const ONSETS: [&str; 10] = ["B", "D", "G", "K", "L", "M", "N", "P", "R", "T"];
const VOWELS: [&str; 8] = ["AA", "AE", "EH", "IH", "IY", "OW", "UW", "EY"];
const FINALS: [&[&str]; 3] = [&["P", "T", "K", "F"], &["B", "D", "G", "V", "M", "N"], &["S", "Z", "SH", "CH", "JH"]];

fn spell(phones: &[String]) -> String {
    phones.iter().map(|p| p.to_lowercase()).collect()
}

fn unit_gaussian<R: Rng>(dim: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| scale * gaussian(rng)).collect()
}

fn add(a: &[f64], b: &[f64], k: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + k * y).collect()
}

/// Writes a planted corpus under `root`: `alignments.jsonl`,
/// `activations/layer-{L}/{utt}.s3ma`, `manifests/{split}-layer-{L}.json`
/// for the `train`, `validation` and `all` splits, and `frequencies.tsv`.
pub fn write_corpus(spec: &CorpusSpec, root: &Path) -> Result<SynthCorpus, CorpusError> {
    let inv = FeatureInventory::default();
    let mut rng = stage_rng(spec.seed, "synth/corpus/lexicon");
    let dim = spec.dim;
    let off_nns = unit_gaussian(dim, 1.0, &mut rng);
    let off_vbz = unit_gaussian(dim, 1.0, &mut rng);
    let off_ff = unit_gaussian(dim, 1.0, &mut rng);
    let off_bad = unit_gaussian(dim, 1.0, &mut rng);
    let allo: Vec<Vec<f64>> = (0..3).map(|_| unit_gaussian(dim, 0.5, &mut rng)).collect();
    let allo_of = |a: Allomorph| &allo[a as usize];

    let mut words: Vec<SynthWord> = Vec::new();
    let mut taken: BTreeSet<String> = BTreeSet::new();

    // Material words first so generated pseudo-words avoid their spellings.
    if spec.materials {
        let mut lookup: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut material = |word: &str, form: &PhonForm, vector: Vec<f64>, words: &mut Vec<SynthWord>| -> Vec<f64> {
            if let Some(v) = lookup.get(word) {
                return v.clone();
            }
            lookup.insert(word.to_string(), vector.clone());
            taken.insert(word.to_string());
            words.push(SynthWord {
                word: word.to_string(),
                tag: "RB",
                phones: form.labels().to_vec(),
                vector: vector.clone(),
            });
            vector
        };
        let ff = default_false_friends(&inv).expect("bundled false friends load");
        for p in &ff {
            let base = material(&p.base.word, &p.base.form, unit_gaussian(dim, 1.0, &mut rng), &mut words);
            let infl = add(&add(&base, &off_ff, 1.0), allo_of(p.allomorph), 1.0);
            material(&p.inflected.word, &p.inflected.form, infl, &mut words);
        }
        let shared = add(&off_nns, &off_vbz, 0.5).iter().map(|x| x * 0.5).collect::<Vec<_>>();
        let fc = default_forced_choice(&inv).expect("bundled forced-choice triples load");
        for t in &fc {
            let base = material(&t.base.words[0], &t.base.form, unit_gaussian(dim, 1.0, &mut rng), &mut words);
            for (cand, bad) in [(&t.consistent, false), (&t.inconsistent, true)] {
                let class = classify_allomorph(&cand.form, &inv).ok().and_then(|c| c.allomorph);
                let mut v = add(&base, &shared, 1.0);
                if let Some(a) = class {
                    v = add(&v, allo_of(a), 1.0);
                }
                if bad {
                    v = add(&v, &off_bad, 1.0);
                }
                material(&cand.words[0], &cand.form, v, &mut words);
            }
        }
    }

    let fresh = |rng: &mut StageRng, final_class: usize, taken: &mut BTreeSet<String>| -> Vec<String> {
        loop {
            let mut p: Vec<String> = Vec::new();
            for _ in 0..2 {
                p.push(ONSETS[rng.random_range(0..ONSETS.len())].into());
                p.push(VOWELS[rng.random_range(0..VOWELS.len())].into());
            }
            let finals = FINALS[final_class];
            p.push(finals[rng.random_range(0..finals.len())].into());
            let w = spell(&p);
            let (s, es) = (format!("{w}s"), format!("{w}es"));
            if !taken.contains(&w) && !taken.contains(&s) && !taken.contains(&es) {
                taken.extend([w, s, es]);
                return p;
            }
        }
    };

    for (n, base_tag, infl_tag, offset) in [
        (spec.nouns, "NN", "NNS", &off_nns),
        (spec.verbs, "VB", "VBZ", &off_vbz),
    ] {
        for i in 0..n {
            let class = i % 3;
            let phones = fresh(&mut rng, class, &mut taken);
            let (allomorph, suffix): (Allomorph, &[&str]) = match class {
                0 => (Allomorph::S, &["S"]),
                1 => (Allomorph::Z, &["Z"]),
                _ => (Allomorph::Iz, &["IH", "Z"]),
            };
            let base = unit_gaussian(dim, 1.0, &mut rng);
            let infl = add(&add(&base, offset, 1.0), allo_of(allomorph), 1.0);
            let word = spell(&phones);
            let inflected_word = if allomorph == Allomorph::Iz { format!("{word}es") } else { format!("{word}s") };
            let mut infl_phones = phones.clone();
            infl_phones.extend(suffix.iter().map(|s| s.to_string()));
            words.push(SynthWord { word, tag: base_tag, phones, vector: base });
            words.push(SynthWord { word: inflected_word, tag: infl_tag, phones: infl_phones, vector: infl });
        }
    }
    for i in 0..spec.fillers {
        let phones = fresh(&mut rng, i % 2, &mut taken);
        words.push(SynthWord {
            word: spell(&phones),
            tag: "JJ",
            phones,
            vector: unit_gaussian(dim, 1.0, &mut rng),
        });
    }

    let labels: BTreeSet<String> = words.iter().flat_map(|w| w.phones.iter().cloned()).collect();
    let phone_vec: BTreeMap<String, Vec<f64>> = labels
        .into_iter()
        .map(|l| (l, unit_gaussian(dim, 0.3, &mut rng)))
        .collect();

    // Token order and utterance layout.
    let mut order: Vec<usize> = (0..words.len())
        .flat_map(|w| std::iter::repeat_n(w, spec.tokens_per_word))
        .collect();
    let mut orng = stage_rng(spec.seed, "synth/corpus/order");
    order.shuffle(&mut orng);
    let per_utt = spec.words_per_utterance.max(1);
    let hop = spec.hop_us as i64;
    let phone_us = 3 * hop;
    let mut tokens = Vec::with_capacity(order.len());
    // (utterance id, total frames, per-frame (word index, phone label) or gap)
    let mut layout: Vec<(String, Vec<Option<(usize, String)>>)> = Vec::new();
    for (u, chunk) in order.chunks(per_utt).enumerate() {
        let id = format!("utt-{u:04}");
        let mut frames: Vec<Option<(usize, String)>> = vec![None];
        let mut t = hop;
        for (k, &w) in chunk.iter().enumerate() {
            let sw = &words[w];
            let onset = t;
            let mut phonemes = Vec::with_capacity(sw.phones.len());
            for p in &sw.phones {
                phonemes.push(PhonemeSpan {
                    label: p.clone(),
                    onset_s: t as f64 / 1e6,
                    offset_s: (t + phone_us) as f64 / 1e6,
                });
                frames.extend(std::iter::repeat_n(Some((w, p.clone())), 3));
                t += phone_us;
            }
            tokens.push(WordToken {
                utterance_id: id.clone(),
                token_index: k as u32,
                word: sw.word.clone(),
                pos_tag: sw.tag.to_string(),
                onset_s: onset as f64 / 1e6,
                offset_s: t as f64 / 1e6,
                phonemes,
            });
            frames.push(None);
            t += hop;
        }
        layout.push((id, frames));
    }

    fs::create_dir_all(root.join("manifests")).map_err(io_err(root))?;
    let align_path = root.join("alignments.jsonl");
    write_alignments(&align_path, &tokens)?;

    for &layer in &spec.layers {
        let dir = root.join(format!("activations/layer-{layer}"));
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let sigma = spec.noise + spec.layer_noise * layer as f64;
        let mut lrng = stage_rng(spec.seed, &format!("synth/corpus/layer-{layer}"));
        let mut entries = Vec::with_capacity(layout.len());
        for (id, frames) in &layout {
            let mut data = Vec::with_capacity(frames.len() * dim);
            for f in frames {
                for d in 0..dim {
                    let clean = match f {
                        Some((w, p)) => words[*w].vector[d] + phone_vec[p][d],
                        None => 0.0,
                    };
                    data.push((clean + sigma * gaussian(&mut lrng)) as f32);
                }
            }
            let m = ActivationMatrix::new(id.clone(), layer, spec.hop_us, dim, data)?;
            let rel = PathBuf::from(format!("../activations/layer-{layer}/{id}.s3ma"));
            write_activation_file(&dir.join(format!("{id}.s3ma")), &m)?;
            let count = tokens.iter().filter(|t| &t.utterance_id == id).count();
            entries.push(ManifestEntry {
                utterance_id: id.clone(),
                activations: rel,
                alignment_count: count,
            });
        }
        for split in ["train", "validation", "all"] {
            let keep: Vec<ManifestEntry> = entries
                .iter()
                .enumerate()
                .filter(|(i, _)| match split {
                    "train" => i % 5 != 4,
                    "validation" => i % 5 == 4,
                    _ => true,
                })
                .map(|(_, e)| e.clone())
                .collect();
            let m = RunManifest::new(split, layer, PathBuf::from("../alignments.jsonl"), keep);
            let path = root.join(manifest_name(split, layer));
            m.write(&path)?;
        }
    }

    let mut freq = FrequencyTable::default();
    let mut frng = stage_rng(spec.seed, "synth/corpus/frequencies");
    for w in &words {
        let f: f64 = frng.random_range(0.5..4.0);
        freq.insert(&w.word, (f * 1000.0).round() / 1000.0);
    }
    let fpath = root.join("frequencies.tsv");
    fs::write(&fpath, freq.to_tsv()).map_err(io_err(&fpath))?;

    Ok(SynthCorpus {
        root: root.to_path_buf(),
        layers: spec.layers.clone(),
        n_utterances: layout.len(),
        n_tokens: tokens.len(),
    })
}

fn manifest_name(split: &str, layer: u16) -> String {
    SynthCorpus::manifest_pattern(split).replace("{layer}", &layer.to_string())
}
