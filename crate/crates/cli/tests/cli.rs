use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fleet_inverse::scenario::validate;
use fleet_inverse::{parse_scenario, parse_str};

const BIN: &str = env!("CARGO_BIN_EXE_fleet-inverse");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str], scenario: &Path, dir: &Path) -> (Output, String) {
    let out = dir.join("out.csv");
    let o = Command::new(BIN)
        .args(args)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(&out)
        .output()
        .expect("binary runs");
    let csv = std::fs::read_to_string(&out).unwrap_or_default();
    (o, csv)
}

/// `(header, rows)` of a CSV written by the tool.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], row: &[String], name: &str) -> f64 {
    let i = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    row[i].parse().unwrap()
}

fn write_scenario(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("fig3.json")).unwrap()).unwrap();
    edit(&mut v);
    let p = dir.join("scenario.json");
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

#[test]
fn route_times_on_the_two_link_example() {
    let dir = tempfile::tempdir().unwrap();
    let (o, csv) = run(&["certify"], &fixture("fig3.json"), dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = parse_csv(&csv);
    assert_eq!(column(&h, &rows[0], "q_r1"), 60.0);
    assert!((column(&h, &rows[0], "t_r1") - 12.2).abs() < 1e-12);
    assert!((column(&h, &rows[0], "t_r2") - 18.75).abs() < 1e-12);
}

#[test]
fn negative_fleet_size_is_rejected_with_its_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(dir.path(), |v| v["units"][0]["q_crv"] = (-5).into());
    let (o, _) = run(&["forward"], &p, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("parse/negative_flow") && err.contains("units[0].q_crv"),
        "{err}"
    );
}

#[test]
fn dangling_link_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(dir.path(), |v| v["routes"][0]["links"][0] = "z".into());
    let (o, _) = run(&["forward"], &p, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("dangling_id") && err.contains("routes[0].links[0]") && err.contains("`z`"),
        "{err}"
    );
}

#[test]
fn unknown_delay_and_malformed_json() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(dir.path(), |v| v["links"][1]["delay"]["type"] = "cubic".into());
    let (o, _) = run(&["forward"], &p, dir.path());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown_delay"));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"schema\": 1,").unwrap();
    let (o, _) = run(&["forward"], &bad, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse/malformed"));
}

#[test]
fn missing_scenario_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run(&["forward"], &dir.path().join("nope.json"), dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unsupported_network_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run(&["stackelberg"], &fixture("network8.json"), dir.path());
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[unsupported/"));
}

#[test]
fn inverse_recovers_the_even_split() {
    let dir = tempfile::tempdir().unwrap();
    let (o, csv) = run(&["inverse"], &fixture("discrete_example.json"), dir.path());
    assert!(o.status.success());
    let (h, rows) = parse_csv(&csv);
    assert_eq!(rows.len(), 1);
    for col in ["f_r1", "f_r2"] {
        assert!((column(&h, &rows[0], col) - 9.5).abs() < 1e-6);
    }
    assert_eq!(column(&h, &rows[0], "theorem_applies"), 1.0);
}

#[test]
fn discrete_inverse_lists_integer_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let (o, csv) = run(&["inverse"], &fixture("discrete_rounded.json"), dir.path());
    assert!(o.status.success());
    let (h, rows) = parse_csv(&csv);
    assert_eq!(rows.len(), 3);
    let cands: Vec<[f64; 2]> = rows[1..]
        .iter()
        .map(|r| [column(&h, r, "f_int_r1"), column(&h, r, "f_int_r2")])
        .collect();
    assert_eq!(cands, vec![[10.0, 9.0], [9.0, 10.0]]);
}

#[test]
fn link_inverse_and_fiber() {
    let dir = tempfile::tempdir().unwrap();
    let (o, csv) = run(&["inverse"], &fixture("cross_dependent.json"), dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = parse_csv(&csv);
    assert!(h.iter().any(|c| c == "fleet_a") && h.iter().any(|c| c == "rep_r1"));
    let total = column(&h, &rows[0], "fleet_c");
    assert!((total - 10.0).abs() < 1e-6);

    let (o, csv) = run(&["fiber"], &fixture("network8.json"), dir.path());
    assert!(o.status.success());
    let (h, rows) = parse_csv(&csv);
    assert_eq!(column(&h, &rows[0], "dim"), 1.0);
    assert_eq!(column(&h, &rows[0], "unique"), 0.0);
}

#[test]
fn malicious_quadratic_is_concave() {
    let dir = tempfile::tempdir().unwrap();
    let (o, csv) = run(&["classify"], &fixture("malicious_pair.json"), dir.path());
    assert!(o.status.success());
    let (_, rows) = parse_csv(&csv);
    assert!(rows.iter().all(|r| r[0] == "ConcaveEverywhere"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ConcaveEverywhere"));
}

#[test]
fn empty_fleet_assigns_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(dir.path(), |v| v["units"][0]["q_crv"] = 0.into());
    let (o, csv) = run(&["forward"], &p, dir.path());
    assert!(o.status.success());
    let (h, rows) = parse_csv(&csv);
    assert_eq!(column(&h, &rows[0], "f_r1"), 0.0);
    assert_eq!(column(&h, &rows[0], "f_r2"), 0.0);
}

#[test]
fn simulation_rows_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let (o, csv) = run(
        &["simulate", "--days", "12", "--mu", "0.3"],
        &fixture("logit_pair.json"),
        dir.path(),
    );
    assert!(o.status.success());
    let (h, rows) = parse_csv(&csv);
    assert_eq!(rows.len(), 12);
    for r in &rows {
        let hdv = column(&h, r, "h_r1") + column(&h, r, "h_r2");
        assert!((hdv - 50.0).abs() < 1e-9);
    }
    let (o, _) = run(&["simulate", "--mu", "1.5"], &fixture("logit_pair.json"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, name) in [
        ("forward", "network8.json"),
        ("simulate", "malicious_pair.json"),
        ("lipschitz", "fig3.json"),
        ("stackelberg", "stackelberg_pair.json"),
    ] {
        let (_, a) = run(&[cmd], &fixture(name), dir.path());
        let (_, b) = run(&[cmd], &fixture(name), dir.path());
        assert!(!a.is_empty());
        assert_eq!(a, b, "{cmd} on {name}");
        assert!(!a.contains('\r'));
    }
}

#[test]
fn every_fixture_parses_and_round_trips() {
    let dir = std::fs::read_dir(fixture("")).unwrap();
    let mut n = 0;
    for entry in dir {
        let path = entry.unwrap().path();
        let sc = parse_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(validate(&sc.to_file()).unwrap(), sc, "{}", path.display());
        let text = serde_json::to_string(&sc.to_file()).unwrap();
        assert_eq!(parse_str(&text).unwrap(), sc);
        n += 1;
    }
    assert!(n >= 10);
}
