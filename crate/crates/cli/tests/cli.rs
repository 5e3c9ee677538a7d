use std::path::Path;
use std::process::{Command, Output};

fn morphoprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphoprobe")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn synth(dir: &Path) {
    let o = morphoprobe(&["synth", "--nouns", "6", "--verbs", "6", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn full_pipeline_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let cfg = dir.path().join("pipeline.toml");
    let cfg = cfg.to_str().unwrap();
    for cmd in ["validate-stimuli", "train", "embed", "evaluate", "report"] {
        let o = morphoprobe(&[cmd, "--config", cfg, "--jobs", "2"]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(dir.path().join("run/report/index.json").is_file());
    assert!(dir.path().join("run/results/summary.json").is_file());
}

#[test]
fn report_accepts_an_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let cfg = dir.path().join("pipeline.toml");
    let out = dir.path().join("elsewhere");
    let (cfg, out) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(code(&morphoprobe(&["evaluate", "--config", cfg, "--layer", "1", "--space", "raw", "--out", out])), 0);
    let o = morphoprobe(&["report", "--out", out]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("fig1_layer_sweep.csv"));
}

#[test]
fn configuration_problems_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&morphoprobe(&["train"])), 2);
    assert_eq!(code(&morphoprobe(&["train", "--config", "/nonexistent/pipeline.toml"])), 2);
    assert_eq!(code(&morphoprobe(&["frobnicate"])), 2);

    synth(dir.path());
    let cfg = dir.path().join("pipeline.toml");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&morphoprobe(&["train", "--config", cfg, "--layer", "40"])), 2);
    assert_eq!(code(&morphoprobe(&["train", "--config", cfg, "--space", "sideways"])), 2);

    let text = std::fs::read_to_string(cfg).unwrap();
    std::fs::write(cfg, text.replace("frequencies.tsv", "missing.tsv")).unwrap();
    assert_eq!(code(&morphoprobe(&["evaluate", "--config", cfg])), 2);
}

#[test]
fn runtime_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    assert_eq!(code(&morphoprobe(&["report", "--out", empty.to_str().unwrap()])), 1);

    synth(dir.path());
    let cfg = dir.path().join("pipeline.toml");
    std::fs::create_dir_all(dir.path().join("run")).unwrap();
    std::fs::write(dir.path().join("run/.lock"), "").unwrap();
    let o = morphoprobe(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("locked"));
}
