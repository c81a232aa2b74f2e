use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_privhyp"))
}

fn preset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.json"))
}

fn write_json(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn design_pair3_reports_both_active() {
    let out = run(&["design", "--config", path_str(&preset("pair3"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = stdout_json(&out);
    assert_eq!(r["method"], "binary");
    assert_eq!(r["case"], "BothActive");
    let budget = r["budgets"][0].as_f64().unwrap();
    for l in r["leakage"].as_array().unwrap() {
        // exact leakage stays within a few percent of the design budget
        assert!((l.as_f64().unwrap() / budget - 1.0).abs() < 0.02);
    }
    assert!(r["kkt"]["stationarity"].as_f64().unwrap() < 1e-8);
}

#[test]
fn design_triple2_notes_collinear_shortcut() {
    let out = run(&["design", "--config", path_str(&preset("triple2"))]);
    assert_eq!(code(&out), 0);
    let r = stdout_json(&out);
    assert_eq!(r["method"], "collinear");
    assert!(r["note"].as_str().unwrap().contains("collinear"));
    assert_eq!(r["leakage"].as_array().unwrap().len(), 3);
}

#[test]
fn design_identical_hypotheses_has_zero_utility() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(
        dir.path(),
        "same.json",
        &json!({"hypotheses": [[0.3, 0.7], [0.3, 0.7]], "budgets": {"normalized": 0.01}}),
    );
    let out = run(&["design", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 0);
    let r = stdout_json(&out);
    assert_eq!(r["exact_utility"].as_f64().unwrap(), 0.0);
}

#[test]
fn design_general_alphabet_uses_sdp() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(
        dir.path(),
        "m3.json",
        &json!({
            "hypotheses": [[0.2, 0.3, 0.5], [0.3, 0.3, 0.4], [0.25, 0.4, 0.35]],
            "budgets": {"explicit": [1e-3, 1e-3, 1e-3]}
        }),
    );
    let out = run(&["design", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = stdout_json(&out);
    assert_eq!(r["method"], "sdp");
    let rank = r["rank"].as_u64().unwrap() as usize;
    let rows = r["mechanism"]["rows"].as_array().unwrap();
    assert_eq!(rows[0].as_array().unwrap().len(), rank.max(1) + 1);
    assert!(r["sdp_gap"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn design_report_round_trips_into_verify() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("design.json");
    let out = run(&["design", "--config", path_str(&preset("verify_pair3")), "--out", path_str(&report)]);
    assert_eq!(code(&out), 0);
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(preset("verify_pair3")).unwrap()).unwrap();
    cfg["verify"]["mechanism"] = json!("design.json");
    let cfg = write_json(dir.path(), "verify.json", &cfg);
    let out = run(&["verify", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(stdout_json(&out)["passed"], true);
}

#[test]
fn verify_perfect_mechanism_passes() {
    let dir = TempDir::new().unwrap();
    write_json(dir.path(), "w0.json", &json!({"rows": [[0.5, 0.5], [0.5, 0.5]]}));
    let cfg = write_json(
        dir.path(),
        "cfg.json",
        &json!({
            "hypotheses": [[0.5, 0.5], [0.45, 0.55]],
            "verify": {"mechanism": "w0.json", "n": 10000}
        }),
    );
    let out = run(&["verify", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 0);
    let r = stdout_json(&out);
    for c in r["checks"].as_array().unwrap() {
        assert_eq!(c["divergence"].as_f64().unwrap(), 0.0);
        assert!(c["exponent"].as_f64().unwrap() <= 1e-4);
    }
}

#[test]
fn verify_rejects_corrupted_mechanism() {
    let dir = TempDir::new().unwrap();
    write_json(dir.path(), "bad.json", &json!({"rows": [[0.6, 0.5], [0.5, 0.5]]}));
    let cfg = write_json(
        dir.path(),
        "cfg.json",
        &json!({
            "hypotheses": [[0.5, 0.5], [0.45, 0.55]],
            "verify": {"mechanism": "bad.json", "n": 1000}
        }),
    );
    let out = run(&["verify", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not normalized"));
}

#[test]
fn verify_reports_failure_with_exit_5() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(
        dir.path(),
        "cfg.json",
        &json!({
            "hypotheses": [[0.5, 0.5], [0.45, 0.55]],
            "budgets": {"normalized": 0.001},
            "verify": {"n": 1000, "deltas": [0.05]}
        }),
    );
    let out = run(&["verify", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 5);
    assert_eq!(stdout_json(&out)["passed"], false);
}

#[test]
fn compare_empty_sweep_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(
        dir.path(),
        "cfg.json",
        &json!({"hypotheses": [[0.5, 0.5], [0.45, 0.55]], "sweep": {"values": []}}),
    );
    let csv = dir.path().join("out.csv");
    let out = run(&["compare", "--config", path_str(&cfg), "--out", path_str(&csv)]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap(),
        "eps_tilde,eps_effective,eps_norm,util_eit,util_oracle,ratio,utility_kind\n"
    );
}

#[test]
fn compare_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for path in [&a, &b] {
        let out = run(&["compare", "--config", path_str(&preset("triple1")), "--out", path_str(path), "--seed", "3"]);
        assert_eq!(code(&out), 0);
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let body = String::from_utf8(text).unwrap();
    assert_eq!(body.lines().count(), 13);
    // 12 significant digits
    let first = body.lines().nth(1).unwrap().split(',').next().unwrap();
    assert_eq!(first.split('e').next().unwrap().replace('.', "").len(), 12);
}

#[test]
fn compare_flag_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(
        dir.path(),
        "cfg.json",
        &json!({"hypotheses": [[0.5, 0.5], [0.45, 0.55]], "sweep": {"values": [0.01]}}),
    );
    let out = run(&["compare", "--config", path_str(&cfg), "--utility", "renyi:0.5", "--grid-step", "0.01"]);
    assert_eq!(code(&out), 0);
    let body = String::from_utf8(out.stdout).unwrap();
    assert!(body.lines().nth(1).unwrap().ends_with(",renyi:0.5"));
    let out = run(&["compare", "--config", path_str(&cfg), "--grid-step", "1.5"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn compare_needs_binary_sources() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(
        dir.path(),
        "cfg.json",
        &json!({"hypotheses": [[0.2, 0.3, 0.5], [0.3, 0.3, 0.4]], "sweep": {"values": [0.01]}}),
    );
    assert_eq!(code(&run(&["compare", "--config", path_str(&cfg)])), 2);
}

#[test]
fn invalid_configs_exit_2() {
    let dir = TempDir::new().unwrap();
    for (name, cfg) in [
        ("range", json!({"hypotheses": [[0.5, 0.5], [0.45, 0.55]], "budgets": {"normalized": 0.3}})),
        ("unknown", json!({"hypotheses": [[0.5, 0.5], [0.45, 0.55]], "budget": 0.1})),
        ("one", json!({"hypotheses": [[0.5, 0.5]], "budgets": {"normalized": 0.1}})),
        ("boundary", json!({"hypotheses": [[1.0, 0.0], [0.45, 0.55]], "budgets": {"normalized": 0.1}})),
    ] {
        let path = write_json(dir.path(), &format!("{name}.json"), &cfg);
        let out = run(&["design", "--config", path_str(&path)]);
        assert_eq!(code(&out), 2, "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(code(&run(&["design", "--config", "/nonexistent/cfg.json"])), 1);
}

#[test]
fn negative_entry_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(
        dir.path(),
        "cfg.json",
        &json!({
            "hypotheses": [[0.95, 0.05], [0.05, 0.95]],
            "budgets": {"normalized": 0.2},
            "reference": [0.99, 0.01]
        }),
    );
    let out = run(&["design", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("negative entry"));
}

#[test]
fn measure_divergences_and_leakage() {
    let out = run(&["measure", "--p", "0.5,0.5", "--q", "0.25,0.75", "--alpha", "0.5"]);
    assert_eq!(code(&out), 0);
    let r = stdout_json(&out);
    assert!((r["relative_entropy"].as_f64().unwrap() - 0.207_518_749_639_421_9).abs() < 1e-14);
    assert!(r["renyi"].as_f64().unwrap() < r["relative_entropy"].as_f64().unwrap());

    let dir = TempDir::new().unwrap();
    let w = write_json(dir.path(), "bsc.json", &json!({"rows": [[0.9, 0.1], [0.1, 0.9]]}));
    let out = run(&["measure", "--p", "0.5,0.5", "--mechanism", path_str(&w)]);
    let r = stdout_json(&out);
    assert!((r["mutual_information"].as_f64().unwrap() - 0.531_004_406_410_718_8).abs() < 1e-14);
    assert!(r["relative_entropy"].is_null());

    assert_eq!(code(&run(&["measure", "--p", "0.5,0.6"])), 2);
}
