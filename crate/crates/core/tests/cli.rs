//! End-to-end runs of the `erbm` binary.

use std::path::Path;
use std::process::Command;

fn erbm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_erbm")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn kernel_config_gives_one_over_pi() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write(dir.path(), "k.json", r#"{"operation":"kernel","params":{"kind":"pk_halfplane","z":[0.0,1.0],"x":0.0}}"#);
    let out = dir.path().join("k.out.json");
    let o = erbm(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["value"].as_f64().unwrap(), std::f64::consts::FRAC_1_PI);
    assert_eq!(v["stderr"].as_f64().unwrap(), 0.0);
    assert_eq!(v["params"]["kind"], "pk_halfplane");
}

#[test]
fn flags_and_config_agree() {
    let o = erbm(&["kernel", "--kind", "pk_halfplane", "--z", "0,1", "--x", "0"]);
    assert!(o.status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write(dir.path(), "k.json", r#"{"operation":"kernel","params":{"kind":"pk_halfplane","z":[0.0,1.0],"x":0.0}}"#);
    let r = erbm(&["run", &cfg]);
    assert_eq!(o.stdout, r.stdout);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"operation":"simulate","domain":{"type":"chordal_standard","slits":[{"y":1.0,"x1":-1.0,"x2":1.0}]},
            "params":{"start":{"type":"interior","z":[0.4,1.8]}},"seed":11,"n_samples":50}"#,
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(erbm(&["run", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(erbm(&["--jobs", "1", "run", &cfg, "--out", b.to_str().unwrap()]).status.success());
    let (a, b) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("path_id,event_idx,kind,x,y,boundary_id\n"));
    assert!(text.lines().count() > 50);
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.json");
    for (name, text) in [
        ("unknown.json", r#"{"operation":"kernel","params":{"kind":"pk_halfplane","z":[0,1],"x":0},"bogus":1}"#),
        ("syntax.json", r#"{"operation":"kernel","#),
        ("params.json", r#"{"operation":"kernel","params":{"kind":"pk_halfplane","x":0}}"#),
        (
            "domain.json",
            r#"{"operation":"kernel","domain":{"type":"annulus","r":-1},"params":{"kind":"pk_er","z":[0,1],"x":0}}"#,
        ),
    ] {
        let cfg = write(dir.path(), name, text);
        let o = erbm(&["run", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{name}");
    }
    let o = erbm(&["run", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn loewner_classical_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let u = write(dir.path(), "u.csv", "t,U\n0,0\n1,0\n");
    let a = write(dir.path(), "a.csv", "t,b\n0,0\n1,2\n");
    let out = dir.path().join("traj.csv");
    let o = erbm(&[
        "loewner",
        "--driving",
        &u,
        "--capacity",
        &a,
        "--points",
        "0,3;0.7,0.2",
        "--T",
        "1",
        "--dt",
        "1e-3",
        "--record-every",
        "100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,point_id,x,y,status\n"));
    let last = text.lines().rfind(|l| l.contains(",0,")).unwrap();
    let y: f64 = last.split(',').nth(3).unwrap().parse().unwrap();
    assert!((y - 5f64.sqrt()).abs() < 1e-6, "{last}");
}

#[test]
fn map_writes_csv_and_normalization() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("map.csv");
    let o = erbm(&[
        "map",
        "--kind",
        "chordal",
        "--x",
        "0",
        "--grid",
        "-1,1,0.5,1.5,3,2",
        "--domain",
        r#"{"type":"chordal_standard","slits":[{"y":1.0,"x1":1.0,"x2":2.0}]}"#,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("x,y,fx,fy\n"));
    assert_eq!(csv.lines().count(), 7);
    let rec: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("map.csv.normalization.json")).unwrap()).unwrap();
    assert_eq!(rec["normalization"]["kind"], "chordal");
    assert_eq!(rec["levels"].as_array().unwrap().len(), 1);
}

#[test]
fn capacity_closed_form() {
    let o = erbm(&["capacity", "--hull", r#"{"type":"vertical_slit","x":0.0,"height":1.0}"#]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["hcap"]["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn verify_fast_suite_passes() {
    let o = erbm(&["verify", "--suite", "fast"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}
