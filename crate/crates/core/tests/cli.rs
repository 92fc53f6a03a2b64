use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use num_complex::Complex64 as C64;
use tunnelcorr::scattering::square_barrier_transmission;
use tunnelcorr::RunConfig;

const BIN: &str = env!("CARGO_BIN_EXE_tunnelcorr");

const BASE: &str = r#"
mode = "closed"

[source]
omega = 20.0
gamma = 0.05

[geometry]
z = 40.0

[grids]
t1 = { min = 41.0, max = 61.0, step = 0.5 }
t2 = { min = 71.0, max = 101.0, step = 0.5 }
omega_sweep = { min = 0.25, max = 6.0, n = 24 }
"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("TUNNELCORR__SOURCE__GAMMA")
        .output()
        .unwrap()
}

fn with_barrier(mode: &str, extra: &str) -> String {
    let base = BASE.replace("mode = \"closed\"", &format!("mode = \"{mode}\""));
    format!("{base}\n[barrier]\n{extra}\n")
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn empty_barrier_scatter_is_transparent() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), BASE, &["scatter"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("out/scatter.csv"));
    assert_eq!(rows.len(), 24);
    for r in rows {
        assert_eq!((r[2], r[3], r[8]), (1.0, 0.0, 1.0));
    }
    let header: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/scatter.json")).unwrap()).unwrap();
    assert_eq!(header["unitarity_residual"]["max"], 0.0);
}

#[test]
fn square_barrier_scatter_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &with_barrier("numeric", "a = 1.0\nb = 2.0\nmu = 2.0"), &["scatter"]);
    assert!(out.status.success());
    for r in csv_rows(&dir.path().join("out/scatter.csv")) {
        let t = square_barrier_transmission(2.0, 1.0, C64::new(r[0], 0.0)).unwrap();
        assert!((r[8] - t.norm_sqr()).abs() <= 1e-10 * t.norm_sqr());
    }
}

#[test]
fn inverted_barrier_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &with_barrier("numeric", "a = 2.0\nb = 1.0\nmu = 2.0"), &["scatter"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("barrier interval empty"));
}

#[test]
fn decay_faster_than_frequency_is_rejected_before_suites() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &BASE.replace("gamma = 0.05", "gamma = 25.0"), &["validate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("source.gamma"));
    assert!(!dir.path().join("out/validate.json").exists());
}

#[test]
fn light_cone_violation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = BASE.replace("t1 = { min = 41.0", "t1 = { min = 40.5");
    let out = run(dir.path(), &cfg, &["correlate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("light-cone"));
}

#[test]
fn correlate_closed_summary_and_reference_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), BASE, &["correlate"]);
    assert!(out.status.success());
    let grid = fs::read_to_string(dir.path().join("out/grid.csv")).unwrap();
    assert!(grid.starts_with("# tunnelcorr grid v1 mode=closed\nt1,t2,p,w,p_ref\n"));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert!((s["delay"].as_f64().unwrap() - 40.0).abs() <= 0.5);
    assert!((s["weight_fit"]["gamma"].as_f64().unwrap() / 0.05 - 1.0).abs() < 1e-2);
    assert_eq!(s["transmission_mod2"], 1.0);
}

#[test]
fn opaque_mode_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_barrier("opaque", "a = 1.0\nb = 2.0\nmu = 100.0");
    let out = run(dir.path(), &cfg, &["correlate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert!((s["delay"].as_f64().unwrap() - 39.0).abs() <= 0.5);
    assert!(s["barrier_traversal_time"].as_f64().unwrap().abs() <= 0.5);
    let model = RunConfig::from_toml(&cfg).unwrap().build_model().unwrap();
    let tm2 = model.opaque_factor().unwrap().norm_sqr();
    assert!((s["transmission_mod2"].as_f64().unwrap() / tm2 - 1.0).abs() < 1e-12);
}

#[test]
fn mode_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), BASE, &["correlate", "--mode", "opaque"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_barrier("opaque", "a = 1.0\nb = 2.0\nmu = 100.0");
    let read = |name: &str| fs::read(dir.path().join("out").join(name)).unwrap();
    assert!(run(dir.path(), &cfg, &["scatter"]).status.success());
    assert!(run(dir.path(), &cfg, &["correlate"]).status.success());
    let first = (read("scatter.csv"), read("scatter.json"), read("grid.csv"));
    assert!(run(dir.path(), &cfg, &["scatter"]).status.success());
    assert!(run(dir.path(), &cfg, &["correlate"]).status.success());
    assert_eq!(first, (read("scatter.csv"), read("scatter.json"), read("grid.csv")));
}

#[test]
fn config_round_trip() {
    let cfg = RunConfig::from_toml(&with_barrier("numeric", "a = 1.0\nsegments = [{ length = 0.5, cutoff = 3.0 }, { length = 0.25, cutoff = 9.0 }]")).unwrap();
    let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(cfg, again);
}

#[test]
fn environment_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, BASE).unwrap();
    let out = Command::new(BIN)
        .args(["validate", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .env("TUNNELCORR__SOURCE__GAMMA", "30.0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_with_injected_fault_names_b1() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["validate", "--seed", "7", "--inject-fault", "b1-sign", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL scattering/B1 residual"), "{stdout}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("validate.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["seed"], 7);
}

#[test]
fn validate_default_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let start = std::time::Instant::now();
    let out = Command::new(BIN).args(["validate", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(start.elapsed().as_secs() < 120);
}
