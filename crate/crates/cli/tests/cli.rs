use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(cmd: &str, config: &Value, out: &Path, extra: &[&str]) -> Output {
    let cfg = out.with_extension("json");
    std::fs::write(&cfg, serde_json::to_string(config).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_thinlayer"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn repo_config(name: &str) -> Value {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let hdr = rd.headers().unwrap().iter().map(String::from).collect();
    let rows = rd.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (hdr, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (hdr, rows) = table(path);
    let c = hdr.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {hdr:?}"));
    rows.iter().map(|r| r[c].parse().unwrap()).collect()
}

fn eigenvalues(out: &Path, op: &str) -> Vec<f64> {
    let (hdr, rows) = table(&out.join("spectrum.csv"));
    let (o, e) = (hdr.iter().position(|h| h == "operator").unwrap(), hdr.iter().position(|h| h == "eigenvalue").unwrap());
    rows.iter().filter(|r| r[o] == op).map(|r| r[e].parse().unwrap()).collect()
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let st = Command::new(env!("CARGO_BIN_EXE_thinlayer")).arg("geometry").arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = Command::new(env!("CARGO_BIN_EXE_thinlayer"))
        .args(["geometry", "--config"])
        .arg(dir.path().join("absent.json"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn unknown_key_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = repo_config("circle.json");
    cfg["geometry"]["colour"] = json!("blue");
    let out = dir.path().join("out");
    let o = run("geometry", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    assert!(!out.join("geometry.csv").exists());
}

#[test]
fn coarse_ellipse_sweep_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run("converge", &repo_config("ellipse-coarse.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("convergence.csv").exists());
}

#[test]
fn flat_sweep_is_exact_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_config("flat-segment.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run("converge", &cfg, out, &["--seed", "7"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ca, cb) = (std::fs::read(a.join("convergence.csv")).unwrap(), std::fs::read(b.join("convergence.csv")).unwrap());
    assert_eq!(ca, cb);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(a.join("convergence.json")).unwrap()).unwrap();
    let fits = summary["fits"].as_array().unwrap();
    let disc: Vec<_> = fits.iter().filter(|f| f["observable"] == "discrepancy").collect();
    assert!(!disc.is_empty() && disc.iter().all(|f| f["status"] == "exact"), "{disc:?}");
    assert_eq!(summary["acceptance"]["ok"], json!(true));
}

#[test]
fn geometry_potentials() {
    let dir = tempfile::tempdir().unwrap();
    let circle = dir.path().join("circle");
    assert_eq!(run("geometry", &repo_config("circle.json"), &circle, &[]).status.code(), Some(0));
    assert!(column(&circle.join("geometry.csv"), "v_eff").iter().all(|v| (v + 0.25).abs() < 1e-12));

    let sphere = dir.path().join("sphere");
    assert_eq!(run("geometry", &repo_config("sphere.json"), &sphere, &[]).status.code(), Some(0));
    assert!(column(&sphere.join("geometry.csv"), "v_eff").iter().all(|v| v.abs() < 1e-12));

    let torus = dir.path().join("torus");
    assert_eq!(run("geometry", &repo_config("torus.json"), &torus, &[]).status.code(), Some(0));
    let csv = torus.join("geometry.csv");
    let (k1, k2, v) = (column(&csv, "kappa_1"), column(&csv, "kappa_2"), column(&csv, "v_eff"));
    for i in 0..v.len() {
        assert!((v[i] + 0.25 * (k1[i] - k2[i]).powi(2)).abs() < 1e-14);
    }
}

#[test]
fn flat_strip_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "schema_version": 1,
        "geometry": { "family": "segment", "params": { "length": 1.0 }, "grid": [400] },
        "solver": { "n": 3 },
        "spectrum": { "epsilon": 0.05, "operators": ["h-eff", "full-h"], "matrix_market": true }
    });
    let out = dir.path().join("out");
    let o = run("spectrum", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let pi2 = std::f64::consts::PI.powi(2);
    for op in ["h-eff", "full-h"] {
        let ev = eigenvalues(&out, op);
        assert_eq!(ev.len(), 3);
        for (n, e) in ev.iter().enumerate() {
            let want = ((n + 1) as f64).powi(2) * pi2;
            assert!((e - want).abs() / want < 1e-3, "{op} λ{} = {e}", n + 1);
        }
    }
    let mtx = std::fs::read_to_string(out.join("full-h.mtx")).unwrap();
    assert!(mtx.starts_with("%%MatrixMarket matrix coordinate"));
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(out.join("full-h.json")).unwrap()).unwrap();
    assert!(sidecar.is_object());
}

#[test]
fn effective_spectra_of_circle_and_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("circle");
    let mut cfg = repo_config("circle.json");
    cfg["spectrum"]["operators"] = json!(["h-eff"]);
    assert_eq!(run("spectrum", &cfg, &out, &[]).status.code(), Some(0));
    let ev = eigenvalues(&out, "h-eff");
    for (e, want) in ev.iter().zip([-0.25, 0.75, 0.75]) {
        assert!((e - want).abs() < 1e-3, "{e} vs {want}");
    }

    let out = dir.path().join("sphere");
    let cfg = json!({
        "schema_version": 1,
        "geometry": { "family": "full-sphere", "params": { "radius": 1.0 }, "grid": [96, 192] },
        "solver": { "n": 4 },
        "spectrum": { "operators": ["h-eff"] }
    });
    let o = run("spectrum", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let ev = eigenvalues(&out, "h-eff");
    for (e, want) in ev.iter().zip([0.0, 2.0, 2.0, 2.0]) {
        assert!((e - want).abs() < 1e-3 * want.max(1.0), "{e} vs {want}");
    }
}
