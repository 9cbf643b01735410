use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fieldsense::cli::config::PipelineConfig;
use fieldsense::geo3d::GridGeometry;
use fieldsense::map::{Label, PatchLabel, TraversabilityMap};

fn fieldsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fieldsense")).args(args).output().unwrap()
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn eval_accuracy(dir: &Path) -> String {
    let csv = std::fs::read_to_string(dir.join("eval.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    let col = header.iter().position(|&h| h == "accuracy").unwrap();
    row[col].to_string()
}

#[test]
fn shipped_configs_validate() {
    for name in ["ground", "fuse", "radar", "cells", "yard"] {
        let path = workspace().join("configs").join(format!("{name}.toml"));
        let cfg = PipelineConfig::from_file(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
        cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn missing_scene_is_reported_by_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "scene = \"no_such_scene.toml\"\n").unwrap();
    let out = fieldsense(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no_such_scene.toml"), "{err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[ground]\nconfidense = 0.9\n").unwrap();
    let out = fieldsense(&["ground", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("confidense"));
}

#[test]
fn simulate_then_eval_truth_against_itself_and_its_inverse() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let yard = workspace().join("configs/yard.toml");
    let out = fieldsense(&["simulate", "--config", yard.to_str().unwrap(), "--frames", "1", "--out", sim.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let truth = sim.join("truth.csv");
    for file in ["lidar_000.pts", "stereo_000.pts", "thermal_000.pts", "radar_000.rad", "truth.ppm"] {
        assert!(sim.join(file).exists(), "{file}");
    }

    let same = dir.path().join("same");
    let t = truth.to_str().unwrap();
    let out = fieldsense(&["eval", t, t, "--out", same.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(eval_accuracy(&same).parse::<f64>().unwrap(), 1.0);

    let mut inverted = TraversabilityMap::read_csv_file(&truth).unwrap();
    for cell in &mut inverted.cells {
        cell.label = match cell.label {
            Label::Ground => Label::NonGround,
            Label::NonGround => Label::Ground,
            other => other,
        };
    }
    let inv = dir.path().join("inverted.csv");
    inverted.write_csv_file(&inv).unwrap();
    let flipped = dir.path().join("flipped");
    let out = fieldsense(&["eval", inv.to_str().unwrap(), t, "--out", flipped.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(eval_accuracy(&flipped).parse::<f64>().unwrap(), 0.0);
}

#[test]
fn eval_rejects_mismatched_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, rows: usize| {
        let g = GridGeometry::new((0.0, 0.0), 1.0, rows, 3).unwrap();
        let map = TraversabilityMap::from_labels(g, vec![PatchLabel::new(Label::Ground, 0.1); rows * 3], 1).unwrap();
        let path = dir.path().join(name);
        map.write_csv_file(&path).unwrap();
        path
    };
    let (a, b) = (write("a.csv", 2), write("b.csv", 4));
    let out = fieldsense(&["eval", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("geometr"));
}

#[test]
fn unknown_method_is_an_error() {
    let out = fieldsense(&["ground", "--method", "sonar"]);
    assert!(!out.status.success());
}

#[test]
fn demo_writes_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = fieldsense(&["demo", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for stage in ["ground", "fuse", "radar", "cells"] {
        assert!(dir.path().join(stage).is_dir(), "{stage}");
    }
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(!report.is_empty());
    assert!(!String::from_utf8_lossy(&out.stdout).is_empty());
}

#[test]
fn eval_on_a_canned_150_cell_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridGeometry::new((0.0, 0.0), 1.0, 10, 15).unwrap();
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (n, p, t) in [(90, Label::Ground, Label::Ground), (10, Label::Ground, Label::NonGround), (45, Label::NonGround, Label::NonGround), (5, Label::NonGround, Label::Ground)] {
        pred.extend(std::iter::repeat(PatchLabel::new(p, 1.0)).take(n));
        truth.extend(std::iter::repeat(PatchLabel::new(t, 1.0)).take(n));
    }
    let save = |name: &str, cells: Vec<PatchLabel>| {
        let path = dir.path().join(name);
        TraversabilityMap::from_labels(g, cells, 1).unwrap().write_csv_file(&path).unwrap();
        path
    };
    let (p, t) = (save("pred.csv", pred), save("truth.csv", truth));
    let out_dir = dir.path().join("eval");
    let out = fieldsense(&["eval", p.to_str().unwrap(), t.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Precision"), "{stdout}");

    let csv = std::fs::read_to_string(out_dir.join("eval.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    let get = |k: &str| row[header.iter().position(|&h| h == k).unwrap()].parse::<f64>().unwrap();
    assert_eq!((get("tp"), get("fp"), get("tn"), get("fn")), (90.0, 10.0, 45.0, 5.0));
    assert!((get("precision") - 0.9).abs() < 1e-12);
    assert!((get("rejection_precision") - 0.9).abs() < 1e-12);
    assert!((get("f1") - 12.0 / 13.0).abs() < 1e-12);
}
