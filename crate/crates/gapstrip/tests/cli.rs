use std::path::Path;
use std::process::{Command, Output};

use gapstrip::output::read_dispersion_csv;
use serde_json::Value;

const CHEAP: &[&str] = &[
    "sweep.eta_samples=17",
    "sweep.bands=3",
    "sweep.window_samples=5",
    "sweep.psi_max=4.0",
    "sweep.workers=1",
    "fem.target_h=0.05",
    "fem.near_divisions=8",
    "fem.grading=1.3",
];

fn run(sub: &str, dir: &Path, extra: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gapstrip"));
    cmd.arg(sub).arg("--set").arg(format!("output.directory=\"{}\"", dir.display()));
    for s in extra {
        cmd.arg("--set").arg(s);
    }
    cmd.output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn statuses(v: &Value) -> Vec<String> {
    v["nodes"]["nodes"].as_array().unwrap().iter().map(|n| n["status"].as_str().unwrap().to_owned()).collect()
}

#[test]
fn limit_writes_curves_and_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("limit", dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("limit_dispersion.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("eta,lambda1,lambda2,lambda3,lambda4,j1,k1"), "{header}");
    assert_eq!(csv.lines().count(), 1 + 8 * 32 + 1);
    let nodes = json(&dir.path().join("limit_nodes.json"));
    assert!(statuses(&nodes).iter().any(|s| s == "opens_gap"));
    assert!(std::fs::read_to_string(dir.path().join("limit.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn exceptional_and_tall_strips() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("limit", dir.path(), &["geometry.height=0.5"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    assert!(statuses(&json(&dir.path().join("limit_nodes.json"))).iter().any(|s| s == "exceptional_h"));

    let o = run("limit", dir.path(), &["geometry.height=1.2"]);
    assert!(o.status.success());
    assert!(statuses(&json(&dir.path().join("limit_nodes.json"))).iter().any(|s| s == "shaded"));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [&["fem.color=1"][..], &["geometry.height=-1"], &["output.deterministic=false"], &["sweep.eta_samples=3"]] {
        let o = run("limit", dir.path(), bad);
        assert_eq!(o.status.code(), Some(2), "{bad:?}: {}", stderr(&o));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_gapstrip")).args(["limit", "/nonexistent/run.toml"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unperforated_gaps_are_closed() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("gaps", dir.path(), CHEAP);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&dir.path().join("bands_gaps.json"));
    let gaps = report["gaps"].as_array().unwrap();
    assert_eq!(gaps.len(), 2);
    assert!(gaps.iter().all(|g| g["open"] == false), "{gaps:?}");
}

#[test]
fn dispersion_csv_round_trip_and_determinism() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut args = CHEAP.to_vec();
    args.extend(["geometry.n=2", "geometry.hole.center=[0.0, 0.2]", "geometry.hole.shape={kind=\"disk\", radius=0.08}"]);
    for d in [&a, &b] {
        let o = run("dispersion", d.path(), &args);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["dispersion.csv", "dispersion.json", "dispersion.svg"] {
        let (x, y) = (std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
        assert!(x == y, "{name} differs between runs");
    }
    let ds = json(&a.path().join("dispersion.json"));
    let (eta, rows) = read_dispersion_csv(&std::fs::read(a.path().join("dispersion.csv")).unwrap()).unwrap();
    let grid: Vec<f64> = ds["eta_grid"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(eta, grid);
    for (i, row) in rows.iter().enumerate() {
        let stored: Vec<f64> = ds["values"][i].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert_eq!(row, &stored, "eta = {}", eta[i]);
    }
}
