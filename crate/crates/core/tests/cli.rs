use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn subriem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subriem")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn geodesic_to_file_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let o = subriem(&["geodesic", "--covector", "0.3,-1.2,4.5", "--point", "0.1,0.2,-0.3", "--t-max", "2", "--phi", "--out", path.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty());
    }
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    let (header, rows) = csv_rows(std::str::from_utf8(&text).unwrap());
    assert_eq!(header.len(), 1 + 6 + 1 + 36);
    assert_eq!(rows.last().unwrap()[0], 2.0);
    let h0 = rows[0][7];
    assert!(rows.iter().all(|r| (r[7] - h0).abs() <= 1e-9 * h0));
}

#[test]
fn zero_covector_gives_constant_rows() {
    let o = subriem(&["geodesic", "--covector", "0,0,0", "--point", "1,2,3"]);
    assert!(o.status.success());
    let (_, rows) = csv_rows(&stdout(&o));
    assert!(!rows.is_empty());
    for r in &rows {
        assert_eq!(&r[1..], &[1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0]);
    }
}

fn write_perturbed(dir: &Path) -> String {
    let path = dir.join("perturbed.json");
    fs::write(
        &path,
        r#"{ "name": "perturbed", "dim": 3, "fields": [
            { "components": [ [ [[0,0,0], 1.0] ], [], [ [[0,1,0], -0.5] ] ] },
            { "components": [ [], [ [[0,0,0], 1.0] ], [ [[1,0,0], 0.5], [[3,0,0], 1.0] ] ] } ] }"#,
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn structure_file_and_conjugate_times() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_perturbed(dir.path());
    let o = subriem(&["conjugate", "--structure-file", &file, "--covector", "1,0.5,8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert!((list[0]["t"].as_f64().unwrap() - 0.7221911138783006).abs() < 1e-8);
    assert!(list[0].get("class").is_none());

    let o = subriem(&["conjugate", "--structure", "heisenberg", "--structure-file", &file, "--covector", "1,0,8"]);
    assert_eq!(o.status.code(), Some(1));
    let o = subriem(&["geodesic", "--structure-file", "/nonexistent/s.json", "--covector", "1,0,8"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn heisenberg_conjugate_reports() {
    let o = subriem(&["conjugate", "--covector", "1,0,13", "--t-min", "0.05", "--t-max", "1"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let classes: Vec<&str> = v.as_array().unwrap().iter().map(|c| c["class"].as_str().unwrap()).collect();
    assert_eq!(classes, ["C1", "C0", "C1"]);
    for c in v.as_array().unwrap() {
        assert_eq!(c["multiplicity"], 1);
        assert_eq!(c["signature"], -1);
        let b = c["bracket"].as_array().unwrap();
        assert!(b[0].as_f64().unwrap() <= c["t"].as_f64().unwrap());
    }
    let o = subriem(&["conjugate", "--covector", "1,0,13", "--format", "csv"]);
    assert!(stdout(&o).starts_with("t,multiplicity,signature,bracket_lo,bracket_hi\n"));
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn maslov_and_jacobi_commands() {
    let o = subriem(&["maslov", "--covector", "1,0,11", "--t-min", "0.1"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["index"], -2);
    let o = subriem(&["maslov", "--covector", "1,0,11", "--t-min", "0.1", "--curve", "evolution"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["index"], 2);

    let o = subriem(&["jacobi", "--covector", "1,0,6.283185307179586", "--initial", "0,1,0,0,0,0", "--grid", "10"]);
    assert!(o.status.success());
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["t", "p1", "p2", "p3", "x1", "x2", "x3"]);
    assert_eq!(rows.len(), 11);
    let last = rows.last().unwrap();
    assert!(last[4..].iter().all(|x| x.abs() < 1e-8));
    assert!(rows[5][4..].iter().any(|x| x.abs() > 1e-2));
    let o = subriem(&["jacobi", "--covector", "1,0,1", "--initial", "0,1,0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn collide_both_branches() {
    let o = subriem(&["collide", "--covector", "1,0,8.986818916", "--radius", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["class"], "C0");
    assert!(v["gap"].as_f64().unwrap() <= 1e-9);
    assert!(v["separation"].as_f64().unwrap() >= 0.025);
    let o = subriem(&["collide", "--structure", "euclidean:3", "--covector", "1,0,1", "--radius", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn locus_grid() {
    let o = subriem(&["locus", "--grid", "4,8"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "u0,v0,alpha0,conjugate,class,k1,k2,k3");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 32);
    assert!(rows.iter().all(|r| r.split(',').count() == 8));
    assert!(rows.iter().all(|r| r.split(',').nth(3) == Some("0")));
}

#[test]
fn verify_exit_codes() {
    let o = subriem(&["verify", "r2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS")));
    let o = subriem(&["verify", "r2", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 6);
    assert_eq!(subriem(&["verify", "nope"]).status.code(), Some(1));
    assert_eq!(subriem(&["verify"]).status.code(), Some(1));
}
