use morphoprobe::corpus_io::{
    assign_frames, decode_activation, encode_activation, validate_alignments, ActivationMatrix,
    FrequencyTable, ManifestEntry, PhonemeSpan, RunManifest, WordToken,
};
use proptest::prelude::*;

fn finite_f32() -> impl Strategy<Value = f32> {
    prop_oneof![
        Just(0.0f32),
        Just(-0.0f32),
        Just(f32::MAX),
        Just(f32::MIN),
        Just(f32::MIN_POSITIVE),
        Just(1e-45f32),
        -1e6f32..1e6f32,
    ]
}

fn matrix() -> impl Strategy<Value = ActivationMatrix> {
    (1usize..24, 0usize..20, any::<u16>(), 1u32..1_000_000, "[a-zA-Z0-9_./-]{1,40}").prop_flat_map(
        |(dim, frames, layer, hop, id)| {
            prop::collection::vec(finite_f32(), dim * frames).prop_map(move |data| {
                ActivationMatrix::new(id.clone(), layer, hop, dim, data).unwrap()
            })
        },
    )
}

/// Consecutive words with random gaps, each split into phonemes.
fn utterance() -> impl Strategy<Value = Vec<WordToken>> {
    prop::collection::vec((0.0f64..0.2, 0.005f64..0.6, 1usize..6), 1..12).prop_map(|words| {
        let mut t = 0.0;
        words
            .into_iter()
            .enumerate()
            .map(|(i, (gap, dur, n_ph))| {
                let onset = t + gap;
                let offset = onset + dur;
                t = offset;
                let step = dur / n_ph as f64;
                WordToken {
                    utterance_id: "utt".into(),
                    token_index: i as u32,
                    word: format!("w{i}"),
                    pos_tag: "NN".into(),
                    onset_s: onset,
                    offset_s: offset,
                    phonemes: (0..n_ph)
                        .map(|k| PhonemeSpan {
                            label: "AH".into(),
                            onset_s: onset + k as f64 * step,
                            offset_s: if k + 1 == n_ph { offset } else { onset + (k + 1) as f64 * step },
                        })
                        .collect(),
                }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn activation_round_trip_is_bit_exact(m in matrix()) {
        let bytes = encode_activation(&m).unwrap();
        let back = decode_activation(&bytes).unwrap();
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(back.as_slice()), bits(m.as_slice()));
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(encode_activation(&back).unwrap(), bytes);
    }

    #[test]
    fn frames_partition_words_and_phonemes(tokens in utterance(), hop_ms in 5u32..40) {
        prop_assert!(validate_alignments(&tokens).is_ok());
        let spans: Vec<_> = tokens.iter().map(|t| assign_frames(t, hop_ms * 1000)).collect();
        for w in spans.windows(2) {
            prop_assert!(w[0].word.end <= w[1].word.start);
        }
        for s in &spans {
            let mut prev = s.word.start;
            for p in &s.phonemes {
                prop_assert!(p.start >= s.word.start && p.end <= s.word.end);
                prop_assert!(p.start >= prev);
                prev = p.end;
            }
        }
    }
}

#[test]
fn overlapping_words_are_rejected() {
    let mk = |i: u32, on: f64, off: f64| WordToken {
        utterance_id: "u".into(),
        token_index: i,
        word: "a".into(),
        pos_tag: "NN".into(),
        onset_s: on,
        offset_s: off,
        phonemes: vec![],
    };
    let err = validate_alignments(&[mk(0, 0.0, 0.5), mk(1, 0.4, 0.9)]).unwrap_err();
    assert!(err.to_string().contains("overlap"));
    assert!(validate_alignments(&[mk(0, 0.0, 0.5), mk(0, 0.6, 0.9)]).is_err());
    // Abutting spans are fine.
    assert!(validate_alignments(&[mk(0, 0.0, 0.5), mk(1, 0.5, 0.9)]).is_ok());
}

#[test]
fn frequency_misses_are_explicit() {
    let t = FrequencyTable::parse("Cats\t2.5\ndog\t-1\n").unwrap();
    assert_eq!(t.get("cats"), Some(2.5));
    assert_eq!(t.get("bird"), None);
    assert!(FrequencyTable::parse("x\tinf\n").is_err());
    assert!(FrequencyTable::parse("x\tNaN\n").is_err());
    assert!(FrequencyTable::parse("x 1.0\n").is_err());
}

#[test]
fn manifest_checks_files_and_ids() {
    let dir = tempfile::tempdir().unwrap();
    let m = ActivationMatrix::new("a", 0, 20_000, 2, vec![1.0; 4]).unwrap();
    morphoprobe::corpus_io::write_activation_file(&dir.path().join("a.s3ma"), &m).unwrap();
    std::fs::write(dir.path().join("al.jsonl"), "").unwrap();
    let entry = |id: &str, f: &str| ManifestEntry { utterance_id: id.into(), activations: f.into(), alignment_count: 0 };

    let path = dir.path().join("m.json");
    RunManifest::new("train", 0, "al.jsonl".into(), vec![entry("a", "a.s3ma")]).write(&path).unwrap();
    assert!(RunManifest::read(&path).unwrap().validate().is_ok());

    RunManifest::new("train", 0, "al.jsonl".into(), vec![entry("a", "a.s3ma"), entry("a", "a.s3ma")])
        .write(&path)
        .unwrap();
    assert!(RunManifest::read(&path).unwrap().validate().unwrap_err().to_string().contains("duplicate"));

    RunManifest::new("train", 0, "al.jsonl".into(), vec![entry("b", "b.s3ma")]).write(&path).unwrap();
    assert!(RunManifest::read(&path).unwrap().validate().unwrap_err().to_string().contains("missing"));
}
