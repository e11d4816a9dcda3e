//! End-to-end subcommand tests against the compiled binary.

use std::path::{Path, PathBuf};
use std::process::Command;

use once_cell::sync::Lazy;

fn takt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_takt"))
}

/// One shared samba-like suite for the expensive subcommands.
struct Suite {
    _dir: tempfile::TempDir,
    manifest: PathBuf,
    root: PathBuf,
}

static SUITE: Lazy<Suite> = Lazy::new(|| {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("samba");
    let out = takt()
        .args(["synth", "--suite", "samba_like", "--seed", "5"])
        .arg("--out")
        .arg(&root)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    Suite {
        manifest: root.join("manifest.json"),
        root,
        _dir: dir,
    }
});

fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        r#"
[features]
window_size = 1024

[tcn]
n_layers = 2
base_channels = 4
kernel_size = 3
dilations = [1, 2]

[schedule.fs]
max_epochs = 2
[schedule.ft]
max_epochs = 2

[bayes]
n_positions = 608

[decode]
min_bpm = 85.0
max_bpm = 135.0
"#,
    )
    .unwrap();
    path
}

#[test]
fn evaluate_of_a_file_against_itself_is_perfect() {
    let suite = &*SUITE;
    let ann = suite.root.join("samba_like_000.beats");
    let out = takt()
        .args(["evaluate"])
        .arg("--est")
        .arg(&ann)
        .arg("--ann")
        .arg(&ann)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), "f=1.000 cmlt=1.000 amlt=1.000");
}

#[test]
fn synth_writes_a_complete_manifest() {
    let suite = &*SUITE;
    let text = std::fs::read_to_string(&suite.manifest).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["dataset_name"], "samba_like");
    assert_eq!(json["meter"], 2);
    assert_eq!(json["entries"].as_array().unwrap().len(), 93);
}

#[test]
fn track_then_evaluate_round_trips_at_millisecond_precision() {
    let suite = &*SUITE;
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let out = takt()
        .args(["train", "--model", "bayes", "--subset", "4", "--seed", "0"])
        .arg("--manifest")
        .arg(&suite.manifest)
        .arg("--out")
        .arg(&model)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let est = dir.path().join("est.beats");
    let audio = suite.root.join("samba_like_003.wav");
    let out = takt()
        .args(["track"])
        .arg("--model")
        .arg(&model)
        .arg("--audio")
        .arg(&audio)
        .arg("--out")
        .arg(&est)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // the written file reproduces itself through the format losslessly
    let round = dir.path().join("round.beats");
    let text = std::fs::read_to_string(&est).unwrap();
    std::fs::write(&round, &text).unwrap();
    let out = takt()
        .args(["evaluate"])
        .arg("--est")
        .arg(&round)
        .arg("--ann")
        .arg(&est)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap().trim(),
        "f=1.000 cmlt=1.000 amlt=1.000"
    );

    // and the estimate scores well against the ground truth
    let ann = suite.root.join("samba_like_003.beats");
    let out = takt()
        .args(["evaluate"])
        .arg("--est")
        .arg(&est)
        .arg("--ann")
        .arg(&ann)
        .output()
        .unwrap();
    let line = String::from_utf8(out.stdout).unwrap();
    let f: f64 = line
        .split_whitespace()
        .next()
        .unwrap()
        .trim_start_matches("f=")
        .parse()
        .unwrap();
    assert!(f > 0.8, "tracking quality degraded: {line}");
}

#[test]
fn experiment_emits_the_expected_row_counts() {
    let suite = &*SUITE;
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out_dir = dir.path().join("exp");
    let out = takt()
        .args([
            "experiment",
            "--strategies",
            "bayes,fs",
            "--subsets",
            "4,74",
            "--seeds",
            "2",
            "--workers",
            "2",
        ])
        .arg("--manifest")
        .arg(&suite.manifest)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // 2 strategies x 2 subsets x 2 seeds = 8 cells
    let time_rows: Vec<String> = std::fs::read_to_string(out_dir.join("plotdata_time.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(str::to_string)
        .collect();
    assert_eq!(time_rows.len(), 8);

    // per task: 8 cells x 19 test tracks
    let results = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let beat_rows = results.lines().filter(|l| l.contains(",beat,")).count();
    let downbeat_rows = results.lines().filter(|l| l.contains(",downbeat,")).count();
    assert_eq!(beat_rows, 8 * 19);
    assert_eq!(downbeat_rows, 8 * 19);

    // summary mirrors the table layout
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let header = summary.lines().next().unwrap();
    assert_eq!(
        header,
        "model,beat_cmlt,beat_amlt,beat_f,downbeat_cmlt,downbeat_amlt,downbeat_f"
    );
    assert!(summary.lines().any(|l| l.starts_with("BAYES_0.67,")));
    assert!(summary.lines().any(|l| l.starts_with("FS_12.33,")));
}

#[test]
fn profile_emits_stats_for_every_band_and_tatum() {
    let suite = &*SUITE;
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("profile");
    let out = takt()
        .args(["profile"])
        .arg("--manifest")
        .arg(&suite.manifest)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("profile.csv")).unwrap();
    // header + 2 bands x 8 tatums
    assert_eq!(text.lines().count(), 1 + 16);
    assert!(text.starts_with("band,tatum,median,q1,q3,variance,n"));
}

#[test]
fn failures_exit_nonzero_with_one_error_line() {
    let out = takt()
        .args(["evaluate", "--est", "/nonexistent.beats", "--ann", "/nonexistent.beats"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.starts_with("error: "));

    let out = takt()
        .args(["synth", "--suite", "flamenco", "--out", "/tmp/x"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: "));
}

#[test]
fn seed_env_var_is_honored_as_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, envs) in [(&out_a, Some("9")), (&out_b, None)] {
        let mut cmd = takt();
        cmd.args(["synth", "--suite", "ballroom_like"]).arg("--out").arg(out);
        cmd.env_remove("MT_SEED");
        if let Some(seed) = envs {
            cmd.env("MT_SEED", seed);
        } else {
            cmd.args(["--seed", "9"]);
        }
        let res = cmd.output().unwrap();
        assert!(res.status.success());
    }
    let a = std::fs::read(out_a.join("ballroom_like_000.wav")).unwrap();
    let b = std::fs::read(out_b.join("ballroom_like_000.wav")).unwrap();
    assert_eq!(a, b, "MT_SEED and --seed should coincide");
}
