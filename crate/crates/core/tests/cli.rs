use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_predissoc")).args(args).current_dir(cwd).output().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn check_reports_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check", "canonical-1d"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let a6 = v["checks"].as_array().unwrap().iter().find(|c| c["id"].as_str().unwrap().starts_with("A6")).unwrap();
    assert!((a6["margin"].as_f64().unwrap() - 0.2).abs() < 1e-12, "{a6}");
}

#[test]
fn solve_gives_a_decaying_resonance() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--out", "o", "solve", "canonical-1d", "--h", "0.08", "--dump"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert!(v["rho_im"].as_f64().unwrap() < 0.0);
    assert_eq!(v["floor"], Value::Bool(false));
    for f in ["resonance.json", "operator.txt", "state.csv"] {
        assert!(dir.path().join("o").join(f).is_file(), "{f}");
    }
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(run(&["fit", "missing.csv", "--geometry", "g.json"], p).status.code(), Some(1));
    assert_eq!(run(&["check", "no-such-model"], p).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"], p).status.code(), Some(1));
    assert_eq!(run(&["solve", "canonical-1d", "--h", "0.08", "--tol", "1e-15"], p).status.code(), Some(1));
    std::fs::write(p.join("bad.json"), r#"{"model": "canonical-1d", "h": []}"#).unwrap();
    let o = run(&["sweep", "bad.json"], p);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("points_per_h"));
    assert_eq!(run(&["--help"], p).status.code(), Some(0));
}

#[test]
fn weber_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["weber", "--eps", "1", "--z", "-2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let y = json(&o)["value"].as_f64().unwrap();
    assert!((y - (2.0 * std::f64::consts::PI).sqrt() * 1f64.exp()).abs() < 1e-9);
}

#[test]
fn geometry_sweep_fit_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let g = run(&["--out", "out", "geometry", "canonical-1d"], p);
    assert_eq!(g.status.code(), Some(0));
    let gv = json(&g);
    assert!((gv["S"].as_f64().unwrap() - 0.5575887224056111).abs() < 1e-4);
    std::fs::write(
        p.join("sweep.json"),
        r#"{"model": "canonical-1d", "h": [0.12, 0.11, 0.1, 0.09, 0.08, 0.07, 0.06], "workers": 2}"#,
    )
    .unwrap();
    let s = run(&["--out", "out", "sweep", "sweep.json"], p);
    assert_eq!(s.status.code(), Some(0), "{}", String::from_utf8_lossy(&s.stderr));
    assert_eq!(json(&s)["failed"], 0);
    let text = std::fs::read_to_string(p.join("out/records.csv")).unwrap();
    assert_eq!(text.lines().count(), 8);
    let f = run(&["fit", "out/records.csv", "--geometry", "out/geometry.json"], p);
    assert_eq!(f.status.code(), Some(0), "{}", String::from_utf8_lossy(&f.stderr));
    let fv = json(&f);
    for k in ["rate", "power", "realpart"] {
        assert_eq!(fv["verdicts"][k]["pass"], Value::Bool(true), "{k}: {fv}");
    }
}

#[test]
fn fit_with_too_few_points_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(run(&["--out", ".", "geometry", "canonical-1d"], p).status.code(), Some(0));
    std::fs::write(p.join("s.json"), r#"{"model": "canonical-1d", "h": [0.1, 0.08]}"#).unwrap();
    assert_eq!(run(&["--out", ".", "sweep", "s.json"], p).status.code(), Some(0));
    assert_eq!(run(&["fit", "records.csv", "--geometry", "geometry.json"], p).status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // no sea, so no island boundary to measure
    assert_eq!(run(&["geometry", "harmonic-exact"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["weber", "--eps", "1", "--z", "30"], dir.path()).status.code(), Some(2));
}

#[test]
fn shipped_config_parses() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let cfg = predissoc::harness::SweepConfig::load(&root.join("canonical-sweep.json")).unwrap();
    assert_eq!(cfg.h.len(), 17);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(root.join("sweep.schema.json")).unwrap()).unwrap();
    let keys: Vec<&String> = schema["properties"].as_object().unwrap().keys().collect();
    let cfg_json = serde_json::to_value(&cfg).unwrap();
    for k in cfg_json.as_object().unwrap().keys() {
        assert!(keys.contains(&k), "schema lacks {k}");
    }
}
