//! End-to-end tests of the command-line interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_coverstream")
}

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary must run")
}

fn synth_blobs(dir: &Path) -> PathBuf {
    let out = run(
        &[
            "synth", "--out", "data", "--classes", "3", "--bags", "100", "--seed", "9",
        ],
        dir,
    );
    assert!(out.status.success());
    dir.join("data/manifest.txt")
}

#[test]
fn synth_then_reload_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_blobs(dir.path());
    let ds = coverstream::dataset::Dataset::load_manifest(&manifest).unwrap();
    assert_eq!(ds.len(), 100);
    // regenerate in-process with the same parameters and compare bags
    let spec = coverstream::synth::SynthSpec {
        classes: 3,
        dim: 3,
        bags: 100,
        ..Default::default()
    };
    let expected = coverstream::synth::generate(&spec, 9).unwrap();
    for (a, b) in ds.items().iter().zip(expected.items()) {
        assert_eq!(a.bag, b.bag);
    }
}

#[test]
fn stream_respects_budget_flag() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_blobs(dir.path());
    let out = run(
        &[
            "stream",
            "--data",
            manifest.to_str().unwrap(),
            "--variant",
            "varun",
            "--budget",
            "0.2",
            "--seed",
            "1",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let log = fs::read_to_string(dir.path().join("run/steplog_varun_b0.2_s1.csv")).unwrap();
    let last = log.lines().last().unwrap();
    // columns: index,predicted,true_label,queried,confidence,theta,balls,query_rate,accuracy
    let rate: f64 = last.split(',').nth(7).unwrap().parse().unwrap();
    assert!(rate <= 0.2, "final query rate {rate}");
    let results = fs::read_to_string(dir.path().join("run/results.csv")).unwrap();
    assert!(results.starts_with("# results v1\n"));
}

#[test]
fn batch_emits_rows_per_fold_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_blobs(dir.path());
    let out = run(
        &[
            "batch",
            "--data",
            manifest.to_str().unwrap(),
            "--folds",
            "5",
            "--seeds",
            "10",
            "--out",
            "b",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("b/batch.csv")).unwrap();
    let data_rows = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("fold,"))
        .count();
    assert_eq!(data_rows, 50); // 5 folds × 10 seeds
    assert!(csv.lines().last().unwrap().starts_with("# summary mean="));
}

#[test]
fn plan_file_drives_stream() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_blobs(dir.path());
    let plan = format!(
        "mode = stream\nvariants = varun\nbudgets = 0.5\nseeds = 0, 1\ndataset = {}\n",
        manifest.display()
    );
    fs::write(dir.path().join("plan.txt"), plan).unwrap();
    let out = run(&["stream", "--plan", "plan.txt"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("varun,0.5,"));
}

#[test]
fn segment_pipeline_with_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "synth", "--out", "act", "--preset", "actions", "--bags", "360", "--sequences",
            "2", "--seed", "4",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let out = run(
        &[
            "segment",
            "--train",
            "act/manifest.txt",
            "--sequence",
            "act/sequences/seq_000.csv",
            "--truth",
            "act/sequences/seq_000.labels.txt",
            "--out",
            "seg",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("# levenshtein_error "));
    let csv = fs::read_to_string(dir.path().join("seg/segments.csv")).unwrap();
    assert!(csv.starts_with("# segments v1\nstart,end,label,confidence\n"));
}

#[test]
fn save_model_then_inspect_and_segment() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_blobs(dir.path());
    let out = run(
        &[
            "stream",
            "--data",
            manifest.to_str().unwrap(),
            "--variant",
            "full",
            "--seed",
            "2",
            "--save-model",
            "model.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["inspect", "--model", "model.json"], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("balls: "));
    assert!(stdout.contains("count[c0]: "));
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    // unknown flag: clap usage error
    let out = run(&["stream", "--no-such-flag"], dir.path());
    assert!(!out.status.success());
    // missing dataset
    let out = run(&["stream", "--variant", "full"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    // invalid variant
    let manifest = synth_blobs(dir.path());
    let out = run(
        &[
            "stream",
            "--data",
            manifest.to_str().unwrap(),
            "--variant",
            "bogus",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    // bad budget
    let out = run(
        &[
            "stream",
            "--data",
            manifest.to_str().unwrap(),
            "--variant",
            "varun",
            "--budget",
            "1.5",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
}
