//! The binary's external interface: exit codes, CSV layout, error JSON and sidecar.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn vdmlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vdmlab")).args(args).output().unwrap()
}

fn rows(csv: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let body = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, body)
}

fn column(header: &[String], body: &[Vec<String>], name: &str) -> Vec<f64> {
    let k = header.iter().position(|h| h == name).unwrap();
    body.iter().map(|r| r[k].parse().unwrap()).collect()
}

fn error_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap();
    serde_json::from_str(line).unwrap()
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> (String, Value) {
    let out = dir.join(name);
    let mut all: Vec<&str> = args.to_vec();
    let out_s = out.to_str().unwrap().to_string();
    all.extend(["--out", &out_s]);
    let o = vdmlab(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let side: Value = serde_json::from_str(&std::fs::read_to_string(format!("{out_s}.json")).unwrap()).unwrap();
    (csv, side)
}

#[test]
fn diameter_series_has_one_row_per_degree() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, side) = run_to(dir.path(), "d.csv", &["diameter", "--set", "interval", "--d-max", "20", "--seed", "7"]);
    let (h, b) = rows(&csv);
    assert_eq!(h[0], "op");
    assert_eq!(b.len(), 20);
    for name in ["m_d", "l_d"] {
        let c = column(&h, &b, name);
        assert!(c.windows(2).all(|w| w[1] > w[0]));
    }
    assert_eq!(side["spec"]["command"], "diameter");
    assert_eq!(side["spec"]["params"]["seed"], 7);
    assert_eq!(side["row_wall_time_seconds"].as_array().unwrap().len(), 20);
    assert!(side["version"].is_string() && side["threads"].as_u64().unwrap() >= 1);
}

#[test]
fn circle_zd_reduced_roots_are_one() {
    let o = vdmlab(&["zd", "--set", "circle", "--measure", "arc", "--d-max", "5"]);
    assert!(o.status.success());
    let (h, b) = rows(&String::from_utf8(o.stdout).unwrap());
    let reduced = column(&h, &b, "root_reduced");
    let root = column(&h, &b, "root");
    for (d, (r, full)) in reduced.iter().zip(&root).enumerate() {
        let d = d as f64 + 1.0;
        assert!((r - 1.0).abs() < 1e-3);
        // Z_d = m_d! on the circle
        let fact: f64 = (1..=(d as u64 + 1)).map(|k| (k as f64).ln()).sum();
        assert!((full - (fact / (d * (d + 1.0))).exp()).abs() < 1e-12);
    }
}

#[test]
fn invalid_json_reports_pointer_and_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.json");
    std::fs::write(&spec, r#"{"set": {"kind": "interval", "a": -1, "b": "one"}}"#).unwrap();
    let o = vdmlab(&["zd", "--spec", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_json(&o);
    assert_eq!(e["error"]["pointer"], "/set/b");

    std::fs::write(&spec, "{ not json").unwrap();
    let o = vdmlab(&["zd", "--spec", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "invalid-input");
}

#[test]
fn stochastic_commands_require_a_seed() {
    for cmd in ["diameter", "hdiameter", "wdiameter", "lift-check"] {
        let o = vdmlab(&[cmd, "--set", "interval", "--d-max", "2"]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert_eq!(error_json(&o)["error"]["pointer"], "/seed");
    }
    let o = vdmlab(&["zd-mc", "--set", "circle", "--measure", "uniform-circle", "--d-max", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn module_errors_exit_one_with_kind() {
    let o = vdmlab(&["rumely", "--model", "ball", "--grid-radius", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"]["kind"], "grid-too-coarse");
    let o = vdmlab(&["cone", "--set", "cone", "--d-max", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"]["kind"], "unsupported");
}

#[test]
fn spec_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("p.json");
    std::fs::write(
        &spec,
        r#"{"schema": 1, "set": {"kind": "interval", "a": -1, "b": 1},
            "weight": {"scale": 1.0, "exponent": 2.0},
            "measure": {"kind": "lebesgue", "a": -1, "b": 1, "nodes": 40}}"#,
    )
    .unwrap();
    let (csv, side) = run_to(dir.path(), "z.csv", &["zd", "--spec", spec.to_str().unwrap(), "--d-max", "4", "--method", "cholesky"]);
    let (h, b) = rows(&csv);
    assert_eq!(b.len(), 4);
    assert!(column(&h, &b, "cond").iter().all(|c| *c >= 1.0));
    assert_eq!(side["spec"]["problem"]["weight"]["scale"], 1.0);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["diameter", "--set", "circle", "--d-max", "6", "--seed", "5", "--restarts", "4", "--resolution", "48"];
    let (one, _) = run_to(dir.path(), "a.csv", &[&args[..], &["--threads", "1"]].concat());
    let (four, side) = run_to(dir.path(), "b.csv", &[&args[..], &["--threads", "4"]].concat());
    assert_eq!(one, four);
    assert_eq!(side["threads"], 4);
}

#[test]
fn gram_cache_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let args = ["zd", "--set", "interval", "--measure", "arcsine", "--d-max", "6", "--method", "cholesky"];
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_vdmlab"))
            .args(args)
            .arg("--out")
            .arg(&out)
            .env("VDMLAB_CACHE", &cache)
            .output()
            .unwrap();
        assert!(o.status.success());
        let side: Value = serde_json::from_str(&std::fs::read_to_string(format!("{}.json", out.display())).unwrap()).unwrap();
        (std::fs::read(&out).unwrap(), side["summary"]["cache_hits"].as_u64().unwrap())
    };
    let (a, hits_a) = run("a.csv");
    let (b, hits_b) = run("b.csv");
    assert_eq!(a, b);
    assert_eq!((hits_a, hits_b), (0, 6));
}

#[test]
fn every_command_tags_rows_with_an_op() {
    let cases: [&[&str]; 12] = [
        &["basis", "--dim", "2", "--d-max", "3"],
        &["cheb", "--set", "interval", "--d-max", "3", "--resolution", "61"],
        &["diameter", "--set", "interval", "--d-max", "3", "--seed", "1"],
        &["hdiameter", "--set", "ball", "--d-max", "2", "--resolution", "6", "--seed", "1"],
        &["wdiameter", "--set", "interval", "--q-scale", "1", "--d-max", "3", "--seed", "1"],
        &["lift-check", "--set", "interval", "--q-scale", "1", "--d-max", "3", "--resolution", "41", "--seed", "1"],
        &["zd", "--set", "interval", "--measure", "lebesgue", "--d-max", "3", "--method", "lift"],
        &["zd-mc", "--set", "interval", "--measure", "uniform-interval", "--d-max", "2", "--samples", "500", "--seed", "1"],
        &["ldp", "--set", "circle", "--measure", "uniform-circle", "--d-max", "2", "--samples", "500", "--seed", "1"],
        &["christoffel", "--set", "interval", "--measure", "lebesgue", "--d-max", "3", "--per-node"],
        &["rumely", "--model", "product", "--radii", "0.5,2", "--grid-size", "50"],
        &["cone", "--set", "cone", "--q-scale", "0.5", "--q-exponent", "1", "--d-max", "3"],
    ];
    for args in cases {
        let o = vdmlab(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let (h, b) = rows(&String::from_utf8(o.stdout).unwrap());
        assert_eq!(h[0], "op");
        assert!(!b.is_empty(), "{args:?}");
        assert!(b.iter().all(|r| r[0].contains('.')), "{args:?}");
    }
}
