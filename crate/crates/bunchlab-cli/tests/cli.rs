//! End-to-end tests of the binary: exit-code contract, output determinism,
//! and the documented file formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bunchlab"))
}

fn write_json(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn identity_matrix_json(n: usize) -> String {
    let mut re = vec![0.0; n * n];
    for i in 0..n {
        re[i * n + i] = 1.0;
    }
    format!(
        r#"{{"rows":{n},"cols":{n},"re":{:?},"im":{:?}}}"#,
        re,
        vec![0.0; n * n]
    )
}

fn splitter_json() -> String {
    let s = 1.0 / 2f64.sqrt();
    format!(
        r#"{{"rows":2,"cols":2,"re":[{s},{s},{s},{}],"im":[0,0,0,0]}}"#,
        -s
    )
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn parse_probability(text: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix("probability: "))
        .expect("probability line")
        .parse()
        .expect("parseable probability")
}

#[test]
fn perm_identity_prints_one() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_json(dir.path(), "id.json", &identity_matrix_json(3));
    let out = bin().arg("perm").arg(&m).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).contains("ryser: 1"));
}

#[test]
fn perm_all_engines_on_ones() {
    let dir = tempfile::tempdir().unwrap();
    let ones = format!(
        r#"{{"rows":10,"cols":10,"re":{:?},"im":{:?}}}"#,
        vec![1.0; 100],
        vec![0.0; 100]
    );
    let m = write_json(dir.path(), "ones.json", &ones);
    let out = bin().args(["perm", "--engine", "all"]).arg(&m).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    assert!(text.contains("3628800"));
    assert!(text.contains("max relative spread"));
}

#[test]
fn perm_size_guard_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_json(dir.path(), "big.json", &identity_matrix_json(25));
    let out = bin().arg("perm").arg(&m).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn perm_bad_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_json(dir.path(), "bad.json", "{not json");
    let out = bin().arg("perm").arg(&m).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_exits_2() {
    let out = bin().args(["perm", "--frobnicate", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bunch_hom_gives_half() {
    let dir = tempfile::tempdir().unwrap();
    let u = write_json(dir.path(), "u.json", &splitter_json());
    let spec = write_json(dir.path(), "s.json", r#"{"kind":"all_ones","n":2}"#);
    let out = bin()
        .arg("bunch")
        .arg(&u)
        .args(["--kappa", "1", "--gram"])
        .arg(&spec)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_of(&out);
    assert!((parse_probability(&text) - 0.5).abs() < 1e-12, "{text}");
    assert!(text.contains("nonnegative gauge class: true"));
}

#[test]
fn bunch_explicit_matrix_file_for_s() {
    let dir = tempfile::tempdir().unwrap();
    let u = write_json(dir.path(), "u.json", &splitter_json());
    let s = write_json(dir.path(), "s.json", &identity_matrix_json(2));
    let out = bin()
        .arg("bunch")
        .arg(&u)
        .args(["--kappa", "1", "--gram"])
        .arg(&s)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!((parse_probability(&stdout_of(&out)) - 0.25).abs() < 1e-12);
}

#[test]
fn bunch_full_subset_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let u = write_json(dir.path(), "u.json", &splitter_json());
    let spec = write_json(dir.path(), "s.json", r#"{"kind":"all_ones","n":2}"#);
    let out = bin()
        .arg("bunch")
        .arg(&u)
        .args(["--kappa", "1,2", "--gram"])
        .arg(&spec)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn search_bogus_sampler_exits_2() {
    let out = bin()
        .args(["search", "--n", "3", "--trials", "10", "--sampler", "bogus"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn search_is_deterministic_and_clean_at_n3() {
    let args = ["search", "--n", "3", "--trials", "200", "--seed", "1"];
    let a = bin().args(args).output().unwrap();
    let b = bin().args(args).output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout_of(&a), stdout_of(&b));
    assert!(stdout_of(&a).contains("trials with positive margin: 0"));
}

#[test]
fn reck_identity_has_no_elements() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_json(dir.path(), "id.json", &identity_matrix_json(4));
    let out = bin().arg("reck").arg(&m).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).contains("elements: 0"));
}

#[test]
fn reck_splitter_single_element_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_json(dir.path(), "bs.json", &splitter_json());
    let out = bin()
        .args(["--format", "json"])
        .arg("reck")
        .arg(&m)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(v["element_count"], 1);
    assert!(v["reconstruction_error"].as_f64().unwrap() < 1e-12);
}

#[test]
fn reck_non_unitary_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let ones = format!(
        r#"{{"rows":3,"cols":3,"re":{:?},"im":{:?}}}"#,
        vec![1.0; 9],
        vec![0.0; 9]
    );
    let m = write_json(dir.path(), "bad.json", &ones);
    let out = bin().arg("reck").arg(&m).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn selftest_quick_passes_and_is_deterministic() {
    let a = bin().args(["selftest", "--quick", "--seed", "5"]).output().unwrap();
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = bin().args(["selftest", "--quick", "--seed", "5"]).output().unwrap();
    assert_eq!(stdout_of(&a), stdout_of(&b));
    assert!(stdout_of(&a).contains("pass"));
}

#[test]
fn reproduce_coarse_grid_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("scan.csv");
    let out = bin()
        .args(["--format", "csv", "--out"])
        .arg(&csv_path)
        .args(["reproduce", "--grid-step", "0.02"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "d,R,perm_HS,perm_H");
    // 17-significant-digit floats parse back losslessly
    let first = lines.next().unwrap();
    let fields: Vec<f64> = first.split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(fields[0], 0.0);
    assert_eq!(fields[1], 1.0);
    // the human-readable pass/fail table lands on stderr in csv mode
    assert!(String::from_utf8_lossy(&out.stderr).contains("overall: pass"));
}

#[test]
fn reproduce_json_report_structure() {
    let out = bin()
        .args(["--format", "json", "reproduce", "--grid-step", "0.05"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(v["all_pass"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 9);
    assert!(v["reck_elements"].as_u64().unwrap() <= 18 * 17 / 2);
}
