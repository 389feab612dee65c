//! Drives the `clmdp` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn clmdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clmdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = clmdp(args);
    assert!(
        out.status.success(),
        "clmdp {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_line(out: &Output) -> String {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    lines[0].to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_solve_check_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let layout = dir.path().join("layout.json");
    ok(&["generate", "--domain", "salp", "--seed", "8", "--out", p(&model), "--layout", p(&layout)]);
    assert!(json(&layout)["grid"]["goal_cell"].is_array());

    let b6 = dir.path().join("b6.json");
    let summary: serde_json::Value =
        serde_json::from_str(&ok(&["solve", "--model", p(&model), "--technique", "B6", "--out", p(&b6)])).unwrap();
    assert_eq!(summary["has_conflict"], true);
    let check: serde_json::Value =
        serde_json::from_str(&ok(&["check", "--model", p(&model), "--policy", p(&b6)])).unwrap();
    assert_eq!(check["conflict_states"], summary["conflict_states"]);

    let o1 = dir.path().join("o1.json");
    let summary: serde_json::Value =
        serde_json::from_str(&ok(&["solve", "--model", p(&model), "--out", p(&o1), "--log-space"])).unwrap();
    assert_eq!(summary["diagnostics"]["resolved"], true);
    let check: serde_json::Value =
        serde_json::from_str(&ok(&["check", "--model", p(&model), "--policy", p(&o1), "--log-space"])).unwrap();
    assert_eq!(check["has_conflict"], false);
    let entries = json(&o1);
    assert_eq!(entries.as_array().unwrap().len(), check["reachability"]["values"].as_array().unwrap().len());
}

#[test]
fn expert_trajectories_feed_inference_and_o2() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let data = dir.path().join("trajectories.json");
    ok(&["generate", "--domain", "warehouse", "--seed", "3", "--out", p(&model)]);
    ok(&["simulate-expert", "--model", p(&model), "--count", "10", "--seed", "7", "--out", p(&data)]);
    assert_eq!(json(&data)["trajectories"].as_array().unwrap().len(), 10);

    let inferred: serde_json::Value =
        serde_json::from_str(&ok(&["infer", "--model", p(&model), "--trajectories", p(&data)])).unwrap();
    assert_eq!(inferred["z"].as_array().unwrap().len(), json(&model)["z"].as_array().unwrap().len());

    let policy = dir.path().join("o2.json");
    let summary: serde_json::Value = serde_json::from_str(&ok(&[
        "solve", "--model", p(&model), "--technique", "o2", "--trajectories", p(&data), "--out", p(&policy),
    ]))
    .unwrap();
    assert_eq!(summary["inferred_z"], inferred["z"]);
    assert_eq!(summary["has_conflict"], false);
}

#[test]
fn bench_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "bench", "--domain", "taxi", "--technique", "B1,B4,B6,O1,O2", "--trials", "25", "--seed", "10,24",
            "--out", p(&out),
        ]);
        ["results.csv", "report.json", "heatmap.csv", "min_objective.csv"]
            .map(|f| std::fs::read(out.join(f)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn bench_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("experiment.json");
    std::fs::write(
        &config,
        r#"{"domain": {"domain": "salp"}, "techniques": ["B6", "O1"], "trials": 5, "instance_seeds": [3]}"#,
    )
    .unwrap();
    let out = dir.path().join("report");
    let table = ok(&["bench", "--config", p(&config), "--out", p(&out), "--format", "csv"]);
    assert!(table.lines().any(|l| l.starts_with("O1")));
    assert!(out.join("results.csv").exists());
    assert!(!out.join("report.json").exists());
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2);
}

#[test]
fn failures_print_one_machine_readable_line() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    ok(&["generate", "--domain", "salp", "--seed", "3", "--out", p(&model)]);

    let out = clmdp(&["solve", "--model", p(&model), "--technique", "B5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_line(&out).starts_with("error: not-implemented: "));

    let out = clmdp(&["bench", "--domain", "salp", "--technique", "B9"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_line(&out).starts_with("error: unknown-technique: "));

    let out = clmdp(&["check", "--model", p(&dir.path().join("missing.json")), "--policy", p(&model)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_line(&out).starts_with("error: io: "));

    let out = clmdp(&["solve", "--model", p(&model), "--technique", "O2"]);
    assert!(error_line(&out).starts_with("error: invalid-argument: "));

    let out = clmdp(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out).starts_with("error: usage: "));
}
