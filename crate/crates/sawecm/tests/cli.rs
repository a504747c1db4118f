//! End-to-end checks of the command-line interface: artifacts, determinism,
//! and the documented exit codes (0 ok, 1 verification failure, 2 input
//! error, 3 convergence failure).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_sawecm")
}

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .output()
        .expect("spawn sawecm")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sawecm-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("create temp dir");
    dir
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn demo_poly_scalar_emits_all_artifacts() {
    let dir = temp_dir("scalar");
    let out = run(&["demo", "poly-scalar", "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for name in [
        "family.csv",
        "summary.csv",
        "rule_saw-ecm.json",
        "rule_global-ecm.json",
        "rule_independent-ecm.json",
        "rule_lp.json",
        "sparsity_saw-ecm.csv",
    ] {
        assert!(dir.join(name).exists(), "missing {name}");
    }

    let summary = read(&dir.join("summary.csv"));
    let saw_row = summary
        .lines()
        .find(|l| l.starts_with("saw-ecm,"))
        .expect("saw-ecm row");
    let card: usize = saw_row.split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(card, 1, "summary row: {saw_row}");

    // The emitted rule verifies against the emitted family.
    let verify = run(&[
        "verify",
        "--rule",
        dir.join("rule_saw-ecm.json").to_str().unwrap(),
        "--family",
        dir.join("family.csv").to_str().unwrap(),
        "--tolerance",
        "1e-8",
    ]);
    assert!(verify.status.success(), "{}", String::from_utf8_lossy(&verify.stderr));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn demo_poly_vector_strategy_subset() {
    let dir = temp_dir("vector");
    let out = run(&[
        "demo",
        "poly-vector",
        "--strategies",
        "saw-ecm",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary = read(&dir.join("summary.csv"));
    assert_eq!(summary.lines().count(), 2, "header plus one row");
    let card: usize = summary.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(card, 2);
    assert!(!dir.join("rule_lp.json").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn demo_manifold_single_cluster_runs_global_path() {
    let dir = temp_dir("manifold");
    let out = run(&[
        "demo",
        "manifold",
        "--strategies",
        "saw-ecm",
        "--spatial-points",
        "60",
        "--steps",
        "40",
        "--clusters",
        "1",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("snapshot reconstruction error"));

    // The emitted manifold rule passes its own verification chain.
    let verify = run(&[
        "verify",
        "--rule",
        dir.join("rule_saw-ecm.json").to_str().unwrap(),
        "--family",
        dir.join("family.csv").to_str().unwrap(),
        "--tolerance",
        "1e-8",
    ]);
    assert!(verify.status.success(), "{}", String::from_utf8_lossy(&verify.stderr));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn run_is_deterministic_and_verifies() {
    let dir = temp_dir("run");
    // Produce a family file via the demo, then re-run from the file.
    let out = run(&["demo", "poly-scalar", "--strategies", "saw-ecm", "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let family = dir.join("family.csv");

    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out_dir in [&out_a, &out_b] {
        let out = run(&[
            "run",
            "--family",
            family.to_str().unwrap(),
            "--strategy",
            "lp",
            "--pivot",
            "bland",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let rule_a = read(&out_a.join("rule_lp.json"));
    let rule_b = read(&out_b.join("rule_lp.json"));
    assert_eq!(rule_a, rule_b, "same input and seed must be byte-identical");

    let verify = run(&[
        "verify",
        "--rule",
        out_a.join("rule_lp.json").to_str().unwrap(),
        "--family",
        family.to_str().unwrap(),
        "--tolerance",
        "1e-8",
    ]);
    assert!(verify.status.success());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn malformed_family_exits_2_without_output() {
    let dir = temp_dir("malformed");
    let family = dir.join("bad.csv");
    std::fs::write(&family, "M,k\n3,1\nweights\n1,1,1\nsubspace,1,1\n1.0\nnot-a-number\n3.0\n").unwrap();
    let out_dir = dir.join("out");
    let out = run(&[
        "run",
        "--family",
        family.to_str().unwrap(),
        "--strategy",
        "saw-ecm",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.join("rule_saw-ecm.json").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn verify_failure_modes() {
    let dir = temp_dir("verify");
    let out = run(&["demo", "poly-scalar", "--strategies", "saw-ecm", "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let family = dir.join("family.csv");
    let rule_path = dir.join("rule_saw-ecm.json");

    // Zeroed weights: residual 1.0, exit 1.
    let mut rule: serde_json::Value = serde_json::from_str(&read(&rule_path)).unwrap();
    for weights in rule["weights"].as_array_mut().unwrap() {
        for w in weights.as_array_mut().unwrap() {
            *w = serde_json::json!(0.0);
        }
    }
    let zeroed = dir.join("zeroed.json");
    std::fs::write(&zeroed, serde_json::to_string_pretty(&rule).unwrap()).unwrap();
    let out = run(&[
        "verify",
        "--rule",
        zeroed.to_str().unwrap(),
        "--family",
        family.to_str().unwrap(),
        "--tolerance",
        "1e-8",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("\"max_residual\": 1.0"), "report: {report}");

    // Out-of-range index: exit 2.
    let mut rule: serde_json::Value = serde_json::from_str(&read(&rule_path)).unwrap();
    rule["indices"] = serde_json::json!([21]);
    let out_of_range = dir.join("oor.json");
    std::fs::write(&out_of_range, serde_json::to_string_pretty(&rule).unwrap()).unwrap();
    let out = run(&[
        "verify",
        "--rule",
        out_of_range.to_str().unwrap(),
        "--family",
        family.to_str().unwrap(),
        "--tolerance",
        "1e-8",
    ]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn random_ordering_is_recorded_and_reproducible() {
    let dir = temp_dir("ordering");
    let out = run(&["demo", "poly-vector", "--strategies", "saw-ecm", "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let family = dir.join("family.csv");

    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out_dir in [&out_a, &out_b] {
        let out = run(&[
            "run",
            "--family",
            family.to_str().unwrap(),
            "--strategy",
            "saw-ecm",
            "--ordering",
            "random",
            "--seed",
            "42",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let rule_a = read(&out_a.join("rule_saw-ecm.json"));
    assert_eq!(rule_a, read(&out_b.join("rule_saw-ecm.json")));
    let parsed: serde_json::Value = serde_json::from_str(&rule_a).unwrap();
    assert_eq!(parsed["metadata"]["ordering"], "random");
    assert_eq!(parsed["metadata"]["seed"], 42);
    std::fs::remove_dir_all(&dir).ok();
}
