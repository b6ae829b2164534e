use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"{
  "M": 16, "F": -4, "V": 4, "guard": 6, "Mr": 8, "Q": 4,
  "flow": {"t_end": 0.0001}
}"#;

const DRESSED: &str = r#"{
  "F": -4, "V": 4, "guard": 6, "Mr": 8, "Q": 4,
  "flow": {"t_end": 0.0001},
  "s0": [{"order": -1, "coeffs": [{"mode": 1, "re": 0.5}, {"mode": -1, "re": 0.5}]}]
}"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_nfkp"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn records(r: &Value) -> &Vec<Value> {
    r["records"].as_array().unwrap()
}

#[test]
fn trivial_dressing_passes_every_command() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["factorize", "check", "flow", "paper-table"] {
        let out = run(dir.path(), SMALL, &[cmd]);
        let r = report(&out);
        let failed: Vec<_> = records(&r).iter().filter(|x| x["pass"] != true).collect();
        assert!(failed.is_empty(), "{cmd}: {failed:?}");
        assert_eq!(out.status.code(), Some(0), "{cmd}");
    }
}

#[test]
fn derived_dressing_passes_at_a_shallow_floor() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["factorize", "check"] {
        let out = run(dir.path(), DRESSED, &[cmd]);
        let r = report(&out);
        let failed: Vec<_> = records(&r).iter().filter(|x| x["pass"] != true).collect();
        assert!(failed.is_empty(), "{cmd}: {failed:?}");
        if cmd == "check" {
            assert!(records(&r).iter().any(|x| x["name"] == "zs.sign_flip"));
        }
    }
}

#[test]
fn order_zero_dressing_is_rejected_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = "{\n  \"M\": 16,\n  \"s0\": [\n    {\"order\": 0, \"coeffs\": []}\n  ]\n}\n";
    for cmd in ["factorize", "check"] {
        let out = run(dir.path(), bad, &[cmd]);
        assert_eq!(out.status.code(), Some(2));
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.contains("line 4"), "{err}");
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn unknown_keys_and_cross_field_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), r#"{"M": 16, "colour": 1}"#, &["factorize"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), "{\n  \"M\": 16,\n  \"Mr\": 20\n}", &["factorize"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 3"));
    let out = run(dir.path(), r#"{"K": 2}"#, &["flow"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), SMALL, &["paper-table", "--seed", "7"]);
    let b = run(dir.path(), SMALL, &["paper-table", "--seed", "7"]);
    let c = run(dir.path(), SMALL, &["paper-table", "--seed", "8"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let x = run(dir.path(), DRESSED, &["check", "--only", "ym"]);
    let y = run(dir.path(), DRESSED, &["check", "--only", "ym"]);
    assert_eq!(x.stdout, y.stdout);
}

#[test]
fn every_record_carries_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let r = report(&run(dir.path(), SMALL, &["factorize"]));
    let hash = r["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(records(&r).iter().all(|x| x["config_hash"] == hash));
}

#[test]
fn sine_and_cosine_table_matches() {
    let dir = tempfile::tempdir().unwrap();
    // u₋₁ = sin x, u₋₂ = cos 2x
    let cfg = r#"{
      "M": 16, "F": -4, "Mr": 8,
      "table": {
        "u1": [{"mode": 1, "re": 0, "im": -0.5}, {"mode": -1, "re": 0, "im": 0.5}],
        "u2": [{"mode": 2, "re": 0.5}, {"mode": -2, "re": 0.5}]
      }
    }"#;
    let out = run(dir.path(), cfg, &["paper-table"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(records(&r).len(), 11);
    for x in records(&r) {
        assert!(x["value"].as_f64().unwrap() <= 1e-10, "{x}");
    }
    let xi1 = records(&r).iter().find(|x| x["name"] == "table.commutator.xi1").unwrap();
    // 3(sin x)'' + 6(cos 2x)' = -3 sin x - 12 sin 2x, norm √(9/2 + 144/2)
    let note = xi1["note"].as_str().unwrap();
    let closed: f64 = note.rsplit(' ').next().unwrap().parse().unwrap();
    assert!((closed - (76.5f64).sqrt()).abs() < 1e-12, "{note}");
}

#[test]
fn zero_inputs_give_a_zero_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"M": 16, "F": -4, "Mr": 8, "table": {"u1": [], "u2": []}}"#;
    let out_dir = dir.path().join("out");
    let out = run(dir.path(), cfg, &["paper-table", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert!(records(&r).iter().all(|x| x["value"].as_f64() == Some(0.0)));
    let table = std::fs::read_to_string(out_dir.join("paper_table.dat")).unwrap();
    for line in table.lines().skip(1) {
        let cols: Vec<&str> = line.split(' ').collect();
        let (row, engine, closed) = (cols[0], cols[2], cols[3]);
        let unit = row.ends_with("l2.sigma2") || row.ends_with("l3.sigma3");
        let want = if unit { "1.0000000000000000e0" } else { "0.0000000000000000e0" };
        assert_eq!((engine, closed), (want, want), "{line}");
    }
}

#[test]
fn only_keeps_the_named_records() {
    let dir = tempfile::tempdir().unwrap();
    let r = report(&run(dir.path(), SMALL, &["check", "--only", "kp.n2,zs.d.12"]));
    let names: Vec<_> = records(&r).iter().map(|x| x["name"].as_str().unwrap().to_string()).collect();
    assert_eq!(names, ["kp.n2.d_form", "kp.n2.s_form", "kp.n2.forms_agree", "zs.d.12"]);
}

#[test]
fn out_dir_collects_report_and_data() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let cfg = r#"{"M": 16, "F": -4, "V": 4, "guard": 6, "Mr": 8, "outputs": {"series": true},
      "s0": [{"order": -1, "coeffs": [{"mode": 1, "re": 0.5}, {"mode": -1, "re": 0.5}]}]}"#;
    let out = run(dir.path(), cfg, &["factorize", "--out", out_dir.to_str().unwrap()]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().all(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")));
    for f in ["report.json", "S.json", "Y.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let s: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("S.json")).unwrap()).unwrap();
    let first = &s.as_array().unwrap()[0];
    assert_eq!(first["exponents"], serde_json::json!([0, 0, 0]));
    assert_eq!(first["order"], 0);
}

#[test]
fn flow_writes_one_file_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("flow");
    let cfg = r#"{"F": -4, "V": 4, "guard": 6, "flow": {"t_end": 0.0001, "directions": [2]},
      "s0": [{"order": -1, "coeffs": [{"mode": 1, "re": 0.5}, {"mode": -1, "re": 0.5}]}]}"#;
    run(dir.path(), cfg, &["flow", "--out", out_dir.to_str().unwrap()]);
    let conv = std::fs::read_to_string(out_dir.join("flow_t2_convergence.dat")).unwrap();
    assert_eq!(conv.lines().count(), 3);
    let profile = std::fs::read_to_string(out_dir.join("flow_t2_profile.dat")).unwrap();
    assert_eq!(profile.lines().count(), 65);
    assert!(!out_dir.join("flow_t3_convergence.dat").exists());
}
