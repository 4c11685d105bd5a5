use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn srk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srkilling")).args(args).output().expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn passing_checks_exit_zero() {
    let o = srk(&["check", "heisenberg:1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["special"], true);
    assert_eq!(v["pass"], true);
    assert_eq!(v["structure"]["source"], "heisenberg:1");
    assert_eq!(v["structure"]["fingerprint"].as_str().unwrap().len(), 64);
}

#[test]
fn failing_checks_exit_three() {
    let o = srk(&["verify", "heisenberg:1", "--field", "1,0,0"]);
    assert_eq!(o.status.code(), Some(3));
    let v = json(&o);
    assert_eq!(v["pass"], false);
    assert_eq!(v["checks"][0]["name"], "contact");
    assert_eq!(v["checks"][0]["pass"], false);
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    let bad = write(dir.path(), "bad.txt", "[manifold]\nmode = chart\nn = 1\ncoords = x y z\n[frame]\nX1 = 1, 0, 0.5\n");
    for args in [
        vec!["check", missing.to_str().unwrap()],
        vec!["check", "heisenberg:0"],
        vec!["check", &bad],
        vec!["dim", "heisenberg:1"],
        vec!["dim", "heisenberg:1", "--at", "0,0"],
        vec!["verify", "heisenberg:1", "--field", "1,0,"],
        vec!["check", "heisenberg:1", "--tol", "-1"],
        vec!["frobnicate"],
    ] {
        let o = srk(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    // structured errors still produce a JSON report
    let v = json(&srk(&["dim", "heisenberg:1", "--at", "0,0"]));
    assert_eq!(v["error"]["kind"], "input");
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let o = srk(&["dim", "su2", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["dims"], serde_json::json!([4, 4, 4]));
}

#[test]
fn pretty_renders_a_table() {
    let o = srk(&["verify-geometry", "heisenberg:1", "--pretty"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("first_bianchi"));
    assert!(text.contains("overall: PASS"));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let curve = write(dir.path(), "c.txt", "[curve]\nt_range = 0 1\ngamma = t, sin(t), t^2\n");
    let gen = write(dir.path(), "g.txt", "[generator]\nX = 1 -1/2\nA = 1/3\nc = 2\nat = 0,0,0\n");
    for args in [
        vec!["verify-geometry", "su2"],
        vec!["prolong", "heisenberg:1", "--curve", &curve, "--gen", &gen],
        vec!["scan", "heisenberg:1", "--grid", "x:-1:1:3,y:-1:1:3,z:-1:1:3"],
        vec!["verify", "heisenberg:1", "--field", "-y,x,0", "--seed", "7"],
    ] {
        let a = srk(&args);
        let b = srk(&args);
        assert!(a.status.success(), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn exact_verdicts_do_not_depend_on_the_seed() {
    let o = srk(&["curvature", "heisenberg:1", "--seed", "1"]);
    assert_eq!(json(&o)["points"], 100);
    let a = srk(&["verify", "heisenberg:1", "--field", "1,0,y/2", "--seed", "1"]);
    let b = srk(&["verify", "heisenberg:1", "--field", "1,0,y/2", "--seed", "2"]);
    assert_eq!(json(&a)["checks"], json(&b)["checks"]);
}

#[test]
fn help_lists_every_command() {
    let o = srk(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for cmd in [
        "check",
        "connection",
        "curvature",
        "verify-geometry",
        "dim",
        "prolong",
        "path-check",
        "reconstruct",
        "verify",
        "scan",
    ] {
        assert!(text.contains(cmd), "{cmd}");
    }
    assert!(text.contains("Exit status"));
}

#[test]
fn path_check_and_horizontality() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", "[curve]\nt_range = 0 1\ngamma = t, t, 0\n");
    let b = write(dir.path(), "b.txt", "[curve]\nt_range = 0 1\ngamma = t^2, t, sin(3*t)*t*(1 - t)\n");
    let gen = write(dir.path(), "g.txt", "[generator]\nX = 1 0\nA = -1\nc = 0\nat = 0,0,0\n");
    let o = srk(&["path-check", "heisenberg:1", "--curve", &a, "--curve", &b, "--gen", &gen]);
    assert_eq!(o.status.code(), Some(0));
    assert!(json(&o)["deviation"].as_f64().unwrap() < 1e-6);
    // the second curve leaves the distribution
    let o = srk(&["prolong", "heisenberg:1", "--curve", &b, "--gen", &gen, "--require-horizontal"]);
    assert_eq!(o.status.code(), Some(2));
}
