use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mleig::harness::{read_csv, CSV_COLUMNS};

fn mleig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mleig")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn data_lines(text: &str) -> Vec<String> {
    text.lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect()
}

#[test]
fn run_writes_csv_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let cfg = write(dir.path(), "grid.cfg", &format!("experiment = multi_grid\nH = 1/4\nlevels = 3\noutput = {}\n", csv.display()));
    let mesh = dir.path().join("mesh.txt");
    let matrix = dir.path().join("a.txt");
    let out = mleig(&["run", &cfg, "--dump-mesh", mesh.to_str().unwrap(), "--dump-matrix", matrix.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# config: experiment = multi_grid")));
    assert!(text.lines().any(|l| l.starts_with("# quadrature:")));
    assert!(text.lines().any(|l| l.starts_with("# wall_ms_total:")));
    assert_eq!(data_lines(&text)[0], CSV_COLUMNS.join(","));
    let rows = read_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 3);

    // final level is h = 1/16: 17² vertices, 2·16² triangles, 15² interior unknowns
    let mesh_text = fs::read_to_string(&mesh).unwrap();
    assert_eq!(mesh_text.lines().next().unwrap(), "289 512");
    let entries: Vec<Vec<f64>> = fs::read_to_string(&matrix)
        .unwrap()
        .lines()
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(entries.iter().all(|e| e.len() == 4 && e[0] < 225.0 && e[1] < 225.0));
    // P1 stiffness of the structured mesh has diagonal 4
    let diag = entries.iter().find(|e| e[0] == 0.0 && e[1] == 0.0).unwrap();
    assert!((diag[2] - 4.0).abs() < 1e-12);

    let summary = mleig(&["summarize", csv.to_str().unwrap()]);
    assert_eq!(summary.status.code(), Some(0));
    let s = String::from_utf8(summary.stdout).unwrap();
    assert!(s.contains("== multi_grid ==") && s.contains("order err_lambda"), "{s}");
}

#[test]
fn identical_configs_give_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", "experiment = multi_space\ndegrees = 1, 2\nmesh_sizes = 4, 8\ncluster_count = 3\n");
    let a = mleig(&["run", &cfg]);
    let b = mleig(&["run", &cfg]);
    assert_eq!(a.status.code(), Some(0));
    let strip = |o: &Output| -> Vec<Vec<String>> {
        let text = String::from_utf8(o.stdout.clone()).unwrap();
        // wall-clock is the only nondeterministic column
        data_lines(&text).iter().map(|l| l.split(',').take(CSV_COLUMNS.len() - 1).map(str::to_string).collect()).collect()
    };
    let (ra, rb) = (strip(&a), strip(&b));
    assert_eq!(ra.len(), 1 + 2 * 2 * 3);
    assert_eq!(ra, rb);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "experiment = multi_grid\nlevels = 0\n");
    let out = mleig(&["run", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("levels"));

    let split = write(dir.path(), "split.cfg", "experiment = multi_grid\ncluster_count = 2\n");
    assert_eq!(mleig(&["run", &split]).status.code(), Some(2));
    assert_eq!(mleig(&["run", "/nonexistent/config"]).status.code(), Some(2));

    let empty = write(dir.path(), "empty.csv", &format!("# nothing ran\n{}\n", CSV_COLUMNS.join(",")));
    let out = mleig(&["summarize", &empty]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "no data");

    let garbage = write(dir.path(), "garbage.csv", "x,y\n1,2\n");
    assert_eq!(mleig(&["summarize", &garbage]).status.code(), Some(2));
    assert_eq!(mleig(&["frobnicate"]).status.code(), Some(2));
}
