use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
[synth]
seed = 3
n_range = [8, 14]
class_counts = [3, 3, 3, 3, 3, 3, 3]
labeled = 7
test = 7

[synth.skeleton]
kind = "random"
nodes = 21
mean_degree = 3.0
homophily = 0.8

[train]
epochs_per_iteration = 4
patience = 2
lambda = 3
max_iterations = 2

[train.model]
gcn_hidden = 4
node_dim = 4
att_dim = 4
views = 2
hc_hidden = 4

[paths]
dataset = "data.json"
stats = "stats.csv"
out_dir = "run"

[verify]
trials = 20
"#;

fn seal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seal"))
        .current_dir(dir)
        .env_remove("SEAL_CONFIG")
        .args(args)
        .output()
        .expect("spawn seal")
}

fn setup() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, SMALL).unwrap();
    (dir, cfg)
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn gen_train_eval_plot_report() {
    let (dir, cfg) = setup();
    let d = dir.path();
    let cfg = cfg.to_str().unwrap();

    let out = seal(d, &["--config", cfg, "gen"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("WattsStrogatz"));
    let stats = fs::read_to_string(d.join("stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 8);

    ok(&seal(d, &["--config", cfg, "train", "--mode", "seal-ci"]));
    for f in [
        "model.json",
        "report.csv",
        "epochs.csv",
        "selection.json",
        "metrics.csv",
        "config.toml",
    ] {
        assert!(d.join("run").join(f).exists(), "missing {f}");
    }
    let metrics = fs::read_to_string(d.join("run/metrics.csv")).unwrap();
    assert!(metrics.starts_with("mode,accuracy,macro_f1\nseal-ci,"));
    let report = fs::read_to_string(d.join("run/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 4, "iterations 0..=2 plus header");

    // The saved config reproduces the run.
    ok(&seal(
        d,
        &["--config", "run/config.toml", "train", "--out-dir", "again"],
    ));
    assert_eq!(
        fs::read_to_string(d.join("run/model.json")).unwrap(),
        fs::read_to_string(d.join("again/model.json")).unwrap()
    );

    ok(&seal(
        d,
        &[
            "--config",
            cfg,
            "train",
            "--mode",
            "ic-only",
            "--out-dir",
            "ic",
        ],
    ));
    let out = seal(
        d,
        &[
            "--config",
            cfg,
            "eval",
            "--checkpoint",
            "run/model.json",
            "--checkpoint",
            "ic/model.json",
            "--curve",
            "curve.csv",
            "--lambda-grid",
            "1,2,5",
        ],
    );
    ok(&out);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.starts_with("checkpoint,mode,accuracy,macro_f1\n"));
    assert_eq!(table.lines().count(), 3);
    let curve = fs::read_to_string(d.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4);

    ok(&seal(
        d,
        &[
            "plot",
            "--kind",
            "lambda-curve",
            "--input",
            "curve.csv",
            "--out",
            "c.svg",
        ],
    ));
    ok(&seal(
        d,
        &[
            "plot",
            "--kind",
            "loss",
            "--input",
            "run/epochs.csv",
            "--out",
            "l.svg",
        ],
    ));
    let svg = fs::read_to_string(d.join("l.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));

    let out = seal(
        d,
        &[
            "report",
            "run/metrics.csv",
            "ic/metrics.csv",
            "again/metrics.csv",
        ],
    );
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "mode,runs,mean_accuracy,std_accuracy,mean_macro_f1"
    );
    assert!(lines[1].starts_with("ic-only,1,"));
    assert!(lines[2].starts_with("seal-ci,2,"));
    let spread: f64 = lines[2].split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(spread, 0.0, "identical runs have zero spread");
}

#[test]
fn sequential_and_parallel_datasets_match() {
    let (dir, cfg) = setup();
    let cfg = cfg.to_str().unwrap();
    let d = dir.path();
    ok(&seal(d, &["--config", cfg, "gen", "--out", "a.json"]));
    ok(&seal(
        d,
        &["--config", cfg, "--sequential", "gen", "--out", "b.json"],
    ));
    assert_eq!(
        fs::read(d.join("a.json")).unwrap(),
        fs::read(d.join("b.json")).unwrap()
    );
}

#[test]
fn verify_mi_passes_and_writes_csv() {
    let (dir, cfg) = setup();
    let out = seal(
        dir.path(),
        &[
            "--config",
            cfg.to_str().unwrap(),
            "verify-mi",
            "--out",
            "v.csv",
        ],
    );
    ok(&out);
    let csv = fs::read_to_string(dir.path().join("v.csv")).unwrap();
    assert!(csv.lines().count() > 1);
    assert!(csv.lines().skip(1).all(|l| l.ends_with("true")), "{csv}");

    let out = seal(dir.path(), &["verify-mi", "--trials", "0"]);
    ok(&out);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);
}

#[test]
fn config_from_environment() {
    let (dir, cfg) = setup();
    let out = Command::new(env!("CARGO_BIN_EXE_seal"))
        .current_dir(dir.path())
        .env("SEAL_CONFIG", &cfg)
        .arg("gen")
        .output()
        .unwrap();
    ok(&out);
    assert!(dir.path().join("data.json").exists());
}

#[test]
fn bad_input_exits_with_usage_code() {
    let (dir, cfg) = setup();
    let d = dir.path();
    let cfg = cfg.to_str().unwrap();

    fs::write(d.join("typo.toml"), "[train]\nlamda = 3\n").unwrap();
    assert_eq!(
        seal(d, &["--config", "typo.toml", "gen"]).status.code(),
        Some(2)
    );
    assert_eq!(
        seal(d, &["--config", "missing.toml", "gen"]).status.code(),
        Some(2)
    );

    fs::write(d.join("counts.toml"), "[synth]\nclass_counts = [1, 2]\n").unwrap();
    let out = seal(d, &["--config", "counts.toml", "gen"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("class_counts"));

    assert_eq!(
        seal(d, &["--config", cfg, "train"]).status.code(),
        Some(2),
        "no dataset yet"
    );
    ok(&seal(d, &["--config", cfg, "gen"]));
    assert_eq!(
        seal(d, &["--config", cfg, "train", "--mode", "nope"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        seal(d, &["--config", cfg, "train", "--lambda", "0"])
            .status
            .code(),
        Some(2)
    );

    fs::write(d.join("empty.csv"), "lambda,false_prediction_rate\n").unwrap();
    let out = seal(
        d,
        &[
            "plot",
            "--kind",
            "lambda-curve",
            "--input",
            "empty.csv",
            "--out",
            "x.svg",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("x.svg").exists());

    assert_eq!(
        seal(d, &["verify-mi", "--sizes", "5-2"]).status.code(),
        Some(2)
    );
    fs::write(d.join("bad.json"), "{}").unwrap();
    assert_eq!(
        seal(d, &["--config", cfg, "eval", "--checkpoint", "bad.json"])
            .status
            .code(),
        Some(2)
    );
}
