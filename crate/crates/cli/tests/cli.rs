use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradedmg")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_variants() {
    let dir = tempfile::tempdir().unwrap();
    let graded = dir.path().join("g.mesh");
    let uniform = dir.path().join("u.mesh");
    let s = ok(&["generate", "pacman", "--vertices", "500", "--graded", "--out", p(&graded)]);
    assert!(s.contains("vertices") && s.contains("cells"));
    ok(&["generate", "pacman", "--vertices", "500", "--uniform", "--out", p(&uniform)]);
    assert_ne!(fs::read(&graded).unwrap(), fs::read(&uniform).unwrap());

    let again = dir.path().join("g2.mesh");
    ok(&["generate", "pacman", "--vertices", "500", "--out", p(&again)]);
    assert_eq!(fs::read(&graded).unwrap(), fs::read(&again).unwrap());

    let mesh = gradedmg::io::read_mesh(&graded).unwrap();
    let regenerated = gradedmg::meshgen::generate_pacman(&gradedmg::meshgen::GradingSpec::graded(5.0 / 9.0), 500).unwrap();
    assert_eq!(mesh.coords(), regenerated.coords());
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(run(&["generate", "--vertices", "500", "--out", "x.mesh"]).status.code(), Some(2));
    assert_eq!(run(&["generate", "pacman", "--vertices", "-3", "--out", "x.mesh"]).status.code(), Some(2));
    assert_eq!(run(&["coarsen", "m.mesh", "--beta", "0", "--out", "d"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.mesh");
    assert_eq!(run(&["coarsen", p(&missing), "--out", p(dir.path())]).status.code(), Some(1));
    assert_eq!(run(&["solve", p(dir.path()), "--problem", "pacman", "--out", p(dir.path())]).status.code(), Some(1));
}

#[test]
fn coarsen_and_solve_pacman() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("pacman.mesh");
    let levels = dir.path().join("levels");
    ok(&["generate", "pacman", "--vertices", "3000", "--out", p(&mesh)]);
    let table = ok(&["coarsen", p(&mesh), "--beta", "1.5", "--out", p(&levels)]);
    let csv = fs::read_to_string(levels.join("quality.csv")).unwrap();
    let rows = csv.lines().count() - 1;
    assert!(rows >= 3, "{csv}");
    assert!(csv.starts_with("level,cells,vertices,max_ar,max_overlap,max_ratio"));
    assert!(levels.join(format!("level_{}.mesh", rows - 1)).exists());
    assert!(!levels.join(format!("level_{rows}.mesh")).exists());
    assert!(table.lines().count() > rows);

    let mg_out = dir.path().join("mg");
    let s = ok(&["solve", p(&levels), "--problem", "pacman", "--method", "mg", "--out", p(&mg_out)]);
    let row: Vec<&str> = s.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], rows.to_string());
    assert_eq!(row[2], "mg");
    assert!(row[3].parse::<usize>().unwrap() <= 15);
    assert_eq!(row[5], "true");
    assert!(row[6].parse::<f64>().unwrap() < 1e-3);
    let conv = fs::read_to_string(mg_out.join("convergence.csv")).unwrap();
    assert!(conv.starts_with("iteration,relative_residual,seconds"));

    let ilu_out = dir.path().join("ilu");
    let s = ok(&["solve", p(&levels), "--problem", "pacman", "--method", "ilu", "--out", p(&ilu_out)]);
    let ilu_row: Vec<&str> = s.lines().nth(1).unwrap().split(',').collect();
    assert!(ilu_row[3].parse::<usize>().unwrap() > row[3].parse::<usize>().unwrap());

    let loose = dir.path().join("loose");
    let s = ok(&["solve", p(&levels), "--problem", "pacman", "--rtol", "1", "--out", p(&loose)]);
    assert_eq!(s.lines().nth(1).unwrap().split(',').nth(3), Some("1"));
}

#[test]
fn small_mesh_gives_single_level() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("small.mesh");
    ok(&["generate", "pacman", "--vertices", "150", "--out", p(&mesh)]);
    let out = run(&["coarsen", p(&mesh), "--out", p(dir.path())]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("one level"));
    let csv = fs::read_to_string(dir.path().join("quality.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let mg = run(&["solve", p(dir.path()), "--problem", "pacman", "--method", "mg", "--out", p(dir.path())]);
    assert_eq!(mg.status.code(), Some(1));
}

#[test]
fn small_beta_stops_with_sufficient_decrease() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("m.mesh");
    ok(&["generate", "pacman", "--vertices", "3000", "--out", p(&mesh)]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["coarsen", p(&mesh), "--beta", "1.5", "--out", p(&a)]);
    let out = run(&["coarsen", p(&mesh), "--beta", "1.01", "--out", p(&b)]);
    if out.status.success() {
        let read = |d: &Path| -> Vec<Vec<f64>> {
            fs::read_to_string(d.join("quality.csv"))
                .unwrap()
                .lines()
                .skip(1)
                .map(|l| l.split(',').take(3).map(|x| x.parse().unwrap()).collect())
                .collect()
        };
        let (ra, rb) = (read(&a), read(&b));
        for w in rb.windows(2) {
            assert!(w[0][1] > 2.0 * w[1][1], "cells must halve: {rb:?}");
        }
        if rb.len() > 1 {
            assert!(rb[1][2] >= ra[1][2], "smaller beta keeps more vertices");
        }
    } else {
        assert_eq!(out.status.code(), Some(1));
    }
}

#[test]
fn fichera_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("f.mesh");
    let levels = dir.path().join("levels");
    ok(&["generate", "fichera", "--vertices", "1500", "--out", p(&mesh)]);
    ok(&["coarsen", p(&mesh), "--out", p(&levels)]);
    let s = ok(&["solve", p(&levels), "--problem", "fichera", "--out", p(&dir.path().join("s"))]);
    let row: Vec<&str> = s.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[5], "true");
    assert_eq!(row.len(), 6);
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("m.mesh");
    let out = Command::new(env!("CARGO_BIN_EXE_gradedmg"))
        .env("GRADEDMG_THREADS", "2")
        .args(["generate", "pacman", "--vertices", "300", "--out", p(&mesh)])
        .output()
        .unwrap();
    assert!(out.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_gradedmg"))
        .env("GRADEDMG_THREADS", "zero")
        .args(["generate", "pacman", "--vertices", "300", "--out", p(&mesh)])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
