use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tdid::deploy::{deploy, serialize_deployed, to_dot};
use tdid::model::{parse, serialize};
use tdid::solve::solve;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    run_with(args, &[])
}

fn run_with(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tdid"));
    cmd.args(args).env_remove("TDID_ORACLE_CAP");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn validate_exit_codes() {
    assert_eq!(run(&["validate", p(&fixture("cardiac.tdid"))]).status.code(), Some(0));

    let out = run(&["validate", p(&fixture("bad_rowsum.tdid"))]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.lines().count() >= 2, "{stderr}");

    assert_eq!(run(&["validate", p(&fixture("cyclic.tdid"))]).status.code(), Some(1));
    assert_eq!(run(&["validate", p(&fixture("missing.tdid"))]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let garbage = dir.path().join("garbage.tdid");
    std::fs::write(&garbage, "tdid 1\nmaster 1\nchance\n").unwrap();
    assert_eq!(run(&["validate", p(&garbage)]).status.code(), Some(1));
}

#[test]
fn deploy_matches_library_output() {
    let path = fixture("figure1.tdid");
    let did = deploy(&parse(&std::fs::read_to_string(&path).unwrap()).unwrap()).unwrap();
    assert_eq!(stdout(&run(&["deploy", p(&path)])), serialize_deployed(&did));
    assert_eq!(stdout(&run(&["deploy", p(&path), "--emit-dot"])), format!("{}{}", serialize_deployed(&did), to_dot(&did)));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig.deployed");
    assert!(stdout(&run(&["deploy", p(&path), "-o", p(&out), "--emit-dot"])).is_empty());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), serialize_deployed(&did));
    assert_eq!(std::fs::read_to_string(dir.path().join("fig.deployed.dot")).unwrap(), to_dot(&did));

    assert_eq!(run(&["deploy", p(&fixture("cyclic.tdid"))]).status.code(), Some(1));
}

#[test]
fn solve_with_and_without_oracle() {
    let path = fixture("cardiac.tdid");
    let did = deploy(&parse(&std::fs::read_to_string(&path).unwrap()).unwrap()).unwrap();
    let expected = solve(&did).unwrap().to_json(&did);
    assert_eq!(stdout(&run(&["solve", p(&path)])), expected);
    assert_eq!(stdout(&run(&["solve", p(&path), "--oracle"])), expected);

    let out = run_with(&["solve", p(&path), "--oracle"], &[("TDID_ORACLE_CAP", "8")]);
    assert_eq!(out.status.code(), Some(4));

    let one = stdout(&run(&["solve", p(&fixture("one_decision.tdid"))]));
    assert!(one.contains("\"meu\": 7"), "{one}");
}

#[test]
fn abstract_applies_edits_in_order() {
    let path = fixture("cardiac.tdid");
    let dropped = stdout(&run(&["abstract", p(&path), "--drop", "CD"]));
    let model = parse(&dropped).unwrap();
    let names: Vec<&str> = model.variables.iter().map(|v| v.name.as_str()).collect();
    assert_eq!(names, ["treatment", "cr", "cbf", "survival"]);
    assert_eq!(serialize(&model), dropped);

    let both = stdout(&run(&["abstract", p(&path), "--drop", "CD", "--retime", "all=1,3"]));
    let expected = std::fs::read_to_string(fixture("cardiac_kb/v4.tdid")).unwrap();
    assert_eq!(serialize(&parse(&both).unwrap()), serialize(&parse(&expected).unwrap()));

    let out = run(&["abstract", p(&path), "--drop", "poa"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("CD @ *"));

    assert_eq!(run(&["abstract", p(&path), "--retime", "cr=2,3"]).status.code(), Some(1));
    assert_eq!(run(&["abstract", p(&path), "--drop", "nothing"]).status.code(), Some(1));
}

#[test]
fn select_and_evc_on_two_entry_kb() {
    let kb = fixture("kb2");
    let args = |rate: &str| vec!["select".to_string(), p(&kb).into(), "--urgency".into(), rate.into(), "--t0".into(), "1".into(), "--time-unit".into(), "1".into()];
    let slow = args("linear:1");
    let report = stdout(&run(&slow.iter().map(String::as_str).collect::<Vec<_>>()));
    assert!(report.contains("\"model\": \"m2\""), "{report}");
    assert!(report.contains("\"t_star\": 4"), "{report}");
    let fast = args("linear:10");
    let report = stdout(&run(&fast.iter().map(String::as_str).collect::<Vec<_>>()));
    assert!(report.contains("\"model\": \"m1\""), "{report}");

    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("policy.json");
    let mut with_policy = slow.clone();
    with_policy.extend(["--policy-out".into(), p(&policy).into()]);
    stdout(&run(&with_policy.iter().map(String::as_str).collect::<Vec<_>>()));
    assert!(std::fs::read_to_string(&policy).unwrap().contains("\"meu\": 9"));

    let curve = stdout(&run(&["evc", p(&kb), "--urgency", "linear:1", "--t0", "1", "--time-unit", "1"]));
    assert!(curve.starts_with("{\n  \"t0\": 1,\n  \"curve\": ["), "{curve}");
    assert!(!curve.contains("t_star"));
}

#[test]
fn select_errors() {
    let kb = fixture("kb2");
    let base = ["select", p(&kb), "--t0", "1", "--time-unit", "1"];
    let with = |extra: &[&str]| {
        let mut v = base.to_vec();
        v.extend_from_slice(extra);
        run(&v).status.code()
    };
    assert_eq!(with(&["--urgency", "linear:1", "--deadline", "0.5"]), Some(1));
    assert_eq!(with(&["--urgency", "quadratic:1"]), Some(1));
    assert_eq!(with(&["--urgency", "linear:1", "--cost-model", "guess"]), Some(1));
    assert_eq!(with(&["--urgency", "linear:1", "--tag", "absent"]), Some(1));
    assert_eq!(run(&["select", "/nonexistent/kb", "--urgency", "linear:1", "--time-unit", "1"]).status.code(), Some(2));
    // Time unit is mandatory.
    assert_eq!(run(&["select", p(&kb), "--urgency", "linear:1"]).status.code(), Some(2));
}

#[test]
fn cardiac_kb_prefers_the_baseline_under_pressure() {
    let kb = fixture("cardiac_kb");
    let pick = |rate: &str| {
        let out = stdout(&run(&["select", p(&kb), "--urgency", rate, "--time-unit", "1", "--cost-model", "analytic:0.125,0"]));
        out.lines().find(|l| l.contains("\"model\"")).unwrap().trim().to_string()
    };
    assert_eq!(pick("linear:1"), "\"model\": \"v2\",");
    assert_eq!(pick("linear:4"), "\"model\": \"baseline\",");
}
