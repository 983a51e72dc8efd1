use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

const SMALL_MODEL: &str = "\
[scenario]
duration = 20.0

[model]
saliency_dim = 4
navigation_dim = 3
hidden = 8
conv_channels = [2, 2]
grid_width = 16
grid_height = 8
nav_embed = 4
nav_layers = 1
nav_units = 4
epochs = 2
stride = 3
";

fn viewport(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viewport"))
        .args(args)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = viewport(args);
    assert!(
        out.status.success(),
        "viewport {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn default_synth_writes_one_cohort() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--out", p(dir.path())]);
    let csv = std::fs::read_to_string(dir.path().join("trajectories.csv")).unwrap();
    let users: BTreeSet<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(users.len(), 18);
    let srts = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "srt"))
        .count();
    assert_eq!(srts, 1);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "synth");
    assert_eq!(manifest["outputs"].as_object().unwrap().len(), 4);
}

#[test]
fn synth_is_deterministic_per_seed() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(&["synth", "--seed", "7", "--duration", "158", "--out", p(a.path())]);
    ok(&["synth", "--seed", "7", "--duration", "158", "--out", p(b.path())]);
    ok(&["synth", "--seed", "8", "--duration", "158", "--out", p(c.path())]);
    let read = |d: &Path| std::fs::read(d.join("trajectories.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_ne!(read(a.path()), read(c.path()));
    let last = String::from_utf8(read(a.path())).unwrap().lines().last().unwrap().to_string();
    assert!(last.contains(",157.5,"), "{last}");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(viewport(&["synth", "--videos", "abc"]).status.code(), Some(2));
    assert_eq!(viewport(&["frobnicate"]).status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[model]\nhiden = 3\n").unwrap();
    assert_eq!(
        viewport(&["synth", "--config", p(&bad), "--out", p(dir.path())]).status.code(),
        Some(2)
    );
    assert_eq!(
        viewport(&["train", "--data", p(dir.path()), "--variant", "everything"]).status.code(),
        Some(2)
    );
}

#[test]
fn oracle_trace_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("oracle.csv");
    let mut text = String::from("video_id,user_id,start,step,t,pred_phi,pred_theta,true_phi,true_theta\n");
    for w in 0..3 {
        for s in 1..=5 {
            let (phi, theta) = (0.3 * (w + s) as f64, 1.0 + 0.05 * s as f64);
            text.push_str(&format!("v01,u1,{w},{s},{},{phi},{theta},{phi},{theta}\n", (w + 4 + s) as f64 * 0.5));
        }
    }
    std::fs::write(&trace, text).unwrap();
    let out = dir.path().join("eval");
    ok(&["eval", "--predictions", p(&trace), "--out", p(&out)]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    for key in ["rmse_phi", "rmse_theta", "mean_orthodromic", "std_orthodromic"] {
        assert_eq!(report[key], 0.0, "{key}");
    }
    assert_eq!(report["samples"], 15);
    assert_eq!(report["dt"], 0.5);
}

#[test]
fn compare_rejects_mismatched_horizons() {
    let dir = tempfile::tempdir().unwrap();
    let report = |name: &str, steps: usize| {
        let path = dir.path().join(format!("{name}.json"));
        let json = serde_json::json!({
            "name": name, "rmse_phi": 1.0, "rmse_theta": 1.0, "mean_orthodromic": 0.3,
            "std_orthodromic": 0.1, "per_step_orthodromic": vec![0.3; steps], "samples": 10, "dt": 0.5
        });
        std::fs::write(&path, json.to_string()).unwrap();
        path
    };
    let (a, b) = (report("a", 5), report("b", 4));
    let out = viewport(&["compare", p(&a), p(&b), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = root.join("small.toml");
    std::fs::write(&cfg, SMALL_MODEL).unwrap();
    let cfg = p(&cfg);
    let data = root.join("data");
    ok(&["synth", "--videos", "2", "--config", cfg, "--out", p(&data)]);
    ok(&["featurize", "--data", p(&data), "--config", cfg, "--out", p(&root.join("features"))]);
    assert!(root.join("features/saliency/v01.maps").exists());

    assert_eq!(
        viewport(&["train", "--data", p(&data), "--config", cfg, "--train-videos", "v02", "--test-videos", "v02"])
            .status
            .code(),
        Some(2)
    );

    let mut digests = BTreeSet::new();
    let mut reports = Vec::new();
    for variant in ["full", "no_subtitle", "trajectory_only"] {
        let run = root.join(variant);
        ok(&["train", "--data", p(&data), "--variant", variant, "--config", cfg, "--out", p(&run)]);
        let loss = std::fs::read_to_string(run.join("loss.csv")).unwrap();
        assert_eq!(loss.lines().count(), 1 + 2);
        let manifest: serde_json::Value =
            serde_json::from_slice(&std::fs::read(run.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["details"]["test_videos"][0], "v02");
        digests.insert(manifest["outputs"]["model.vspm"].as_str().unwrap().to_string());

        let model = run.join("model.vspm");
        ok(&["predict", "--data", p(&data), "--model", p(&model), "--config", cfg, "--out", p(&run.join("predict"))]);
        let eval_dir = run.join("eval");
        ok(&["eval", "--data", p(&data), "--model", p(&model), "--config", cfg, "--out", p(&eval_dir)]);
        reports.push(eval_dir.join("report.json"));

        // scoring the written trace must reproduce the checkpoint evaluation
        let trace_eval = run.join("trace_eval");
        ok(&[
            "eval",
            "--predictions",
            p(&run.join("predict/predictions.csv")),
            "--name",
            variant,
            "--out",
            p(&trace_eval),
        ]);
        let a: serde_json::Value = serde_json::from_slice(&std::fs::read(eval_dir.join("report.json")).unwrap()).unwrap();
        let b: serde_json::Value =
            serde_json::from_slice(&std::fs::read(trace_eval.join("report.json")).unwrap()).unwrap();
        let diff = (a["mean_orthodromic"].as_f64().unwrap() - b["mean_orthodromic"].as_f64().unwrap()).abs();
        assert!(diff < 1e-12, "{diff}");
    }
    assert_eq!(digests.len(), 3);

    let out = ok(&[
        "compare",
        p(&reports[0]),
        p(&reports[1]),
        p(&reports[2]),
        "--out",
        p(&root.join("compare")),
    ]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 1 + 3, "{table}");
    let curves = std::fs::read_to_string(root.join("compare/curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 3 * 5);
}
