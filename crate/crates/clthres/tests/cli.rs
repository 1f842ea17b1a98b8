//! The command-line surface, exercised through the real binary: sample
//! generation, learning with both schedule kinds, the calculator modes,
//! and the sweep/dataset subcommands with their file outputs.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clthres"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

#[test]
fn generate_then_learn_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples.csv");
    let truth = dir.path().join("truth.json");
    let model = dir.path().join("model.json");
    let ranking = dir.path().join("ranking.csv");

    run_ok(bin().args([
        "generate",
        "--topology",
        "star",
        "--d",
        "9",
        "--k",
        "4",
        "--crossover",
        "0.3",
        "--n",
        "5000",
        "--seed",
        "3",
        "--out",
        samples.to_str().unwrap(),
        "--model-out",
        truth.to_str().unwrap(),
    ]));
    assert!(samples.exists() && truth.exists());

    let stdout = run_ok(bin().args([
        "learn",
        "--input",
        samples.to_str().unwrap(),
        "--beta",
        "0.6",
        "--output",
        model.to_str().unwrap(),
        "--ranking",
        ranking.to_str().unwrap(),
    ]));
    assert!(stdout.contains("kept 4 of 8 edges"), "stdout: {stdout}");

    let truth_model = clthres::ForestModel::load_json(&truth).unwrap();
    let learned = clthres::ForestModel::load_json(&model).unwrap();
    assert_eq!(learned.edges(), truth_model.edges());

    let ranking_text = std::fs::read_to_string(&ranking).unwrap();
    let mut lines = ranking_text.lines();
    assert_eq!(lines.next().unwrap(), "rank,i,j,mi_nats,kept");
    assert_eq!(ranking_text.lines().count(), 1 + 8);

    // Oracle mode on the same samples.
    let stdout = run_ok(bin().args([
        "learn",
        "--input",
        samples.to_str().unwrap(),
        "--oracle-eps",
        "0.0411",
        "--output",
        model.to_str().unwrap(),
    ]));
    assert!(stdout.contains("kept 4 of 8 edges"), "stdout: {stdout}");
}

#[test]
fn exponent_calculator_modes_emit_json() {
    let dir = tempfile::tempdir().unwrap();
    let dist = dir.path().join("dist.json");
    std::fs::write(&dist, r#"{"r": 2, "table": [[0.25, 0.25], [0.25, 0.25]]}"#).unwrap();

    let v: serde_json::Value = serde_json::from_str(&run_ok(bin().args([
        "exponents",
        "--which",
        "mu-star",
        "--dist",
        dist.to_str().unwrap(),
    ])))
    .unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    let v: serde_json::Value = serde_json::from_str(&run_ok(bin().args([
        "exponents",
        "--which",
        "over",
        "--b",
        "0.01",
        "--dist",
        dist.to_str().unwrap(),
    ])))
    .unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.01).abs() < 1e-4);
    assert!(v["diagnostics"]["iterations"].as_u64().unwrap() > 0);

    let v: serde_json::Value = serde_json::from_str(&run_ok(bin().args([
        "exponents",
        "--which",
        "converse",
        "--d",
        "100",
        "--k",
        "50",
        "--r",
        "2",
    ])))
    .unwrap();
    assert!((v["known_k"].as_f64().unwrap() - 3.2555).abs() < 1e-3);
}

#[test]
fn sweep_subcommands_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "n = [300]\nbeta = [0.4, 0.7]\ntrials = 20\nseed = 5\n\n\
         [topology]\nkind = \"star\"\nd = 8\nk = 3\ncrossover = 0.3\n",
    )
    .unwrap();
    let out = dir.path().join("mc");
    run_ok(bin().args([
        "mc-error",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]));
    for f in ["records.csv", "summary.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let records = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert!(records.starts_with("trial,n,schedule,param,k_hat,struct_err"));
    assert_eq!(records.lines().count(), 1 + 2 * 20);

    let decay_cfg = dir.path().join("decay.toml");
    std::fs::write(
        &decay_cfg,
        "n = [200, 400, 800]\nbeta = [0.625]\ntrials = 15\nseed = 5\n\n\
         [topology]\nkind = \"star\"\nd = 8\nk = 3\ncrossover = 0.3\n",
    )
    .unwrap();
    let out = dir.path().join("decay");
    let stdout = run_ok(bin().args([
        "kl-decay",
        "--config",
        decay_cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]));
    assert!(stdout.contains("log-log slope"), "stdout: {stdout}");
    assert!(out.join("decay.csv").exists());
}

#[test]
fn dataset_subcommands_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    // Deterministic mixed-type table with a dependent pair.
    let mut text = String::from("v,a,b\n");
    for i in 0..120 {
        let a = i % 2;
        let b = if i % 10 < 8 { a } else { 1 - a };
        let v = 10.0 + i as f64;
        text.push_str(&format!("{v:.1},{a},{b}\n"));
    }
    std::fs::write(&csv, text).unwrap();

    let cfg = dir.path().join("data.toml");
    std::fs::write(
        &cfg,
        format!(
            "beta = [0.2, 0.5, 0.8]\nfolds = 4\n\n\
             [dataset]\npath = \"{}\"\nhas_header = true\ncolumns = \"ncc\"\n\n\
             [split]\nkind = \"counts\"\ntrain = 100\ntest = 20\nseed = 2\n",
            csv.display()
        ),
    )
    .unwrap();

    let out = dir.path().join("ll");
    let stdout = run_ok(bin().args([
        "loglik",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]));
    assert!(stdout.contains("train rows = 100"), "stdout: {stdout}");
    assert!(out.join("profile.csv").exists());
    assert!(out.join("encoding.json").exists());

    let out = dir.path().join("cv");
    let stdout = run_ok(bin().args([
        "cv-beta",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]));
    assert!(stdout.contains("chosen beta"), "stdout: {stdout}");
    assert!(out.join("cv.csv").exists());
}

#[test]
fn errors_are_reported_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "0,1\n1,oops\n").unwrap();
    let out = bin()
        .args([
            "learn",
            "--input",
            bad.to_str().unwrap(),
            "--beta",
            "0.5",
            "--output",
            dir.path().join("m.json").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "stderr: {stderr}");
}

#[test]
fn model_json_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let path: &Path = &dir.path().join("m.json");
    let truth =
        clthres::build_star_forest(&clthres::StarForestSpec::new(5, 2, 0.25).unwrap()).unwrap();
    truth.save_json(path).unwrap();
    let text1 = std::fs::read_to_string(path).unwrap();
    let back = clthres::ForestModel::load_json(path).unwrap();
    back.save_json(path).unwrap();
    let text2 = std::fs::read_to_string(path).unwrap();
    assert_eq!(text1, text2, "serialized form must be stable");
}
