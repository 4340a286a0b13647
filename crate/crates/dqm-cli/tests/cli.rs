use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dqm_core::report::validate_envelope;
use serde_json::Value;

fn dqm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqm"))
        .args(args)
        .env("DQM_OUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const DQQK: [&str; 9] = [
    "spectrum",
    "--family",
    "dual_quantum_q_krawtchouk",
    "--q",
    "0.5",
    "--N",
    "3",
    "--p",
    "10",
];

#[test]
fn spectrum_json_reproduces_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dqm(dir.path(), &DQQK);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let doc = read_json(&dir.path().join("spectrum-dual_quantum_q_krawtchouk.json"));
    validate_envelope(&doc, Some("spectrum")).unwrap();
    let eig: Vec<f64> = doc["body"]["result"]["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (a, b) in eig.iter().zip([0.0, 1.0, 3.0, 7.0]) {
        assert!((a - b).abs() < 1e-10, "{eig:?}");
    }
    assert_eq!(doc["body"]["result"]["N"], 3);
    assert_eq!(doc["body"]["config"]["family"], "dual_quantum_q_krawtchouk");
}

#[test]
fn spectrum_csv_has_fixed_header() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["--format", "csv"];
    args.extend(DQQK);
    assert_eq!(dqm(dir.path(), &args).status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("spectrum-dual_quantum_q_krawtchouk.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,energy,closed_form,residual"));
    let last = lines.last().unwrap();
    let energy: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(energy, 7.0);
}

#[test]
fn out_dir_flag_beats_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let mut args = vec!["--out-dir", flag_dir.path().to_str().unwrap()];
    args.extend(DQQK);
    assert_eq!(dqm(env_dir.path(), &args).status.code(), Some(0));
    assert!(flag_dir.path().join("spectrum-dual_quantum_q_krawtchouk.json").exists());
    assert!(fs::read_dir(env_dir.path()).unwrap().next().is_none());
}

#[test]
fn bad_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["spectrum"][..],
        &["spectrum", "--family", "legendre"],
        &["spectrum", "--family", "hahn", "--N", "-3"],
        &["spectrum", "--family", "krawtchouk", "--p", "1.5"],
        &["delete", "--family", "hahn", "--levels", "40"],
        &["--tol", "0", "verify-all"],
    ] {
        assert_eq!(dqm(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn admissible_deletion_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dqm(dir.path(), &["delete", "--family", "q_racah", "--levels", "1,2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let doc = read_json(&dir.path().join("delete-q_racah.json"));
    validate_envelope(&doc, Some("delete")).unwrap();
    let r = &doc["body"]["result"];
    assert_eq!(r["deletion"]["admissible"], true);
    assert!(r["deletion"]["max_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(r["christoffel"]["deformed_duality"]["pass"], true);
    assert_eq!(r["christoffel"]["weights"]["all_positive"], true);
}

#[test]
fn inadmissible_deletion_exits_four_unless_unsafe() {
    let dir = tempfile::tempdir().unwrap();
    let out = dqm(dir.path(), &["delete", "--family", "q_racah", "--levels", "2"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("even length"));
    assert!(!dir.path().join("delete-q_racah.json").exists());

    let out = dqm(
        dir.path(),
        &["delete", "--family", "q_racah", "--levels", "2", "--unsafe"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("not hermitian"));
    let doc = read_json(&dir.path().join("delete-q_racah.json"));
    assert_eq!(doc["body"]["result"]["deletion"]["hermiticity"]["pass"], false);
}

#[test]
fn special_path_agrees() {
    let dir = tempfile::tempdir().unwrap();
    for family in ["hahn", "racah", "charlier", "meixner"] {
        let out = dqm(
            dir.path(),
            &["delete", "--family", family, "--levels", "1,2", "--special"],
        );
        assert_eq!(out.status.code(), Some(0), "{family}: {}", stdout(&out));
        let line = stdout(&out);
        assert!(line.contains("special path agrees with"), "{family}: {line}");
        let doc = read_json(&dir.path().join(format!("delete-{family}.json")));
        let special = &doc["body"]["result"]["special"];
        assert!(special["route_deviation"].as_f64().unwrap() < 1e-8);
        assert!(special["report"]["C_l_lambda"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn odd_special_is_quarantined_under_unsafe() {
    let dir = tempfile::tempdir().unwrap();
    let out = dqm(dir.path(), &["delete", "--family", "hahn", "--l", "3", "--unsafe"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("special path skipped"));
    let doc = read_json(&dir.path().join("delete-hahn.json"));
    assert_eq!(doc["body"]["result"]["special"]["report"]["hermitian"], false);
}

#[test]
fn verify_all_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = dqm(
            dir.path(),
            &["--out-dir", d.to_str().unwrap(), "verify-all", "--seed", "11"],
        );
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    }
    let (da, db) = (
        read_json(&a.join("verify-all.json")),
        read_json(&b.join("verify-all.json")),
    );
    validate_envelope(&da, Some("verify-all")).unwrap();
    assert_eq!(da["body"]["result"]["pass"], true);
    // Only the output directory differs between the two runs.
    assert_eq!(da["body"]["result"], db["body"]["result"]);
    let checks = da["body"]["result"]["checks"].as_array().unwrap();
    assert!(checks.len() > 40);
    assert!(checks.iter().any(|c| c["name"] == "casoratian_product_rule"));
}

#[test]
fn tight_tolerance_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dqm(dir.path(), &["--tol", "1e-16", "verify-all"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("verification failed"));
    let doc = read_json(&dir.path().join("verify-all.json"));
    let r = &doc["body"]["result"];
    assert_eq!(r["pass"], false);
    assert!(!r["failures"].as_array().unwrap().is_empty());
    assert_eq!(r["tolerance_override"], 1e-16);
}

#[test]
fn verify_all_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dqm(dir.path(), &["--format", "csv", "verify-all"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("verify-all.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("check,family,value,tolerance,pass"));
}
