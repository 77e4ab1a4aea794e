use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;
use tempfile::TempDir;

fn mbmlab(args: &[&str], config: Option<&str>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mbmlab"));
    cmd.args(args).current_dir(dir);
    if let Some(text) = config {
        let path = dir.join(format!("run_{}.toml", args.join("_").replace(['/', ' '], "_")));
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(&path);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Tables from one default `synthesize` run shared by the tests that need them.
fn tables() -> &'static Path {
    static DIR: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    let (_, p) = DIR.get_or_init(|| {
        let tmp = TempDir::new().unwrap();
        let out = tmp.path().join("out");
        let o = mbmlab(&["synthesize", "--out", out.to_str().unwrap()], None, tmp.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        (tmp, out.join("tables"))
    });
    p
}

fn with_tables(body: &str) -> String {
    format!("tables = {:?}\n{body}", tables().to_str().unwrap())
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn synthesize_default_config_is_biorthogonal_and_reproducible() {
    let first = tables();
    let summary = read_json(&first.join("synthesis_summary.json"));
    assert_eq!(summary["pass"], true);
    for c in summary["kernels"]["checks"].as_array().unwrap().iter().filter(|c| c["check"] == "biorthogonality") {
        assert!(c["lhs"].as_f64().unwrap() <= 1e-3);
    }
    let tmp = TempDir::new().unwrap();
    let o = mbmlab(&["synthesize", "--out", "again"], None, tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for name in ["kernel_synthesis_n0.bin", "kernel_synthesis_n1.bin", "kernel_synthesis_n2.bin", "kernel_dual.bin", "biorthogonality.csv"] {
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(tmp.path().join("again/tables").join(name)).unwrap();
        assert!(a == b, "{name} differs between runs");
    }
    assert!(tmp.path().join("again/tables/synthesize.manifest.json").exists());
}

#[test]
fn corrupted_grid_spec_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let o = mbmlab(&["synthesize", "--out", "o"], Some("[synthesis.window]\nfreq_samples = 1000\n"), tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("freq_samples") || stderr(&o).contains("power of two"), "{}", stderr(&o));
    assert!(!tmp.path().join("o/tables/kernel_dual.bin").exists());
}

#[test]
fn unknown_keys_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    let o = mbmlab(&["verify", "--out", "o"], Some("[verify]\nlnd_tupels = 3\n"), tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("lnd_tupels"), "{}", stderr(&o));
}

#[test]
fn simulate_constant_half_starts_at_zero_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = with_tables("[simulate]\nstep_log2 = 8\ntheta = 0.5\nprofile = { kind = \"constant\", value = 0.5 }\n");
    let runs: Vec<PathBuf> = ["a", "b"]
        .iter()
        .map(|d| {
            let o = mbmlab(&["simulate", "--seed", "1", "--out", d], Some(&cfg), tmp.path());
            assert_eq!(code(&o), 0, "{}", stderr(&o));
            tmp.path().join(d)
        })
        .collect();
    let x = std::fs::read_to_string(runs[0].join("x.csv")).unwrap();
    let mut lines = x.lines();
    assert_eq!(lines.next(), Some("t,value"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first, vec![0.0, 0.0]);
    assert_eq!(x.lines().count(), 258);
    for name in ["x.csv", "y.csv", "b_theta.csv", "x.json", "y.json", "b_theta.json"] {
        assert!(std::fs::read(runs[0].join(name)).unwrap() == std::fs::read(runs[1].join(name)).unwrap(), "{name}");
    }
    let side = read_json(&runs[0].join("y.json"));
    assert!(side["meta"]["truncation_bound"].as_f64().is_some());
    assert!(side["h_descriptor"].as_str().unwrap().contains("constant"));
}

#[test]
fn simulate_tent_preset_reports_condition_a() {
    let tmp = TempDir::new().unwrap();
    let o = mbmlab(&["simulate", "--out", "o"], Some(&with_tables("[simulate]\nstep_log2 = 8\n")), tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let side = read_json(&tmp.path().join("o/x.json"));
    assert_eq!(side["conditions"]["condition_a"], true);
    assert!(side["h_descriptor"].as_str().unwrap().contains("takagi"));
}

#[test]
fn simulate_needs_tables_and_admissible_h() {
    let tmp = TempDir::new().unwrap();
    let o = mbmlab(&["simulate", "--out", "o"], Some("tables = \"nowhere\"\n"), tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("synthesize"), "{}", stderr(&o));
    let o = mbmlab(&["simulate", "--out", "o"], Some(&with_tables("[simulate]\nprofile = { kind = \"constant\", value = 0.95 }\n")), tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("theta bounds"), "{}", stderr(&o));
}

fn schema_errors(report: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(include_str!("../schemas/verify_report.schema.json")).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    v.iter_errors(report).map(|e| e.to_string()).collect()
}

#[test]
fn verify_default_suite_passes_with_a_valid_report() {
    let tmp = TempDir::new().unwrap();
    let o = mbmlab(&["verify", "--out", "o"], Some(&with_tables("")), tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read_json(&tmp.path().join("o/verify_report.json"));
    assert_eq!(report["pass"], true);
    assert_eq!(report["failed"], 0);
    assert!(schema_errors(&report).is_empty(), "{:?}", schema_errors(&report));
    let checks = report["checks"].as_array().unwrap();
    for kind in ["variance_floor", "one_sided_lnd", "det_identity", "fbm_covariance", "biorthogonality"] {
        assert!(checks.iter().any(|c| c["check"] == kind), "{kind} missing");
    }
}

#[test]
fn scaled_kernels_fail_verification_and_keep_the_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = with_tables("[verify]\nkernel_scale = 2.0\nkernel_checks = false\nlnd_tuples = 4\ncovariance_seeds = 200\n");
    let o = mbmlab(&["verify", "--out", "o"], Some(&cfg), tmp.path());
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let report = read_json(&tmp.path().join("o/verify_report.json"));
    assert_eq!(report["pass"], false);
    assert!(schema_errors(&report).is_empty());
    let bad: Vec<&Value> = report["checks"].as_array().unwrap().iter().filter(|c| c["pass"] == false).collect();
    assert!(bad.iter().all(|c| c["check"] == "fbm_covariance" || c["check"] == "one_sided_lnd"));
    assert!(!bad.is_empty());
}

#[test]
fn experiments_reject_long_intervals() {
    let tmp = TempDir::new().unwrap();
    for name in ["dimension", "energy"] {
        let cfg = with_tables(&format!("[experiment.{name}.simulation]\ninterval = [1.0, 2.0]\n"));
        let o = mbmlab(&["experiment", name, "--out", "o"], Some(&cfg), tmp.path());
        assert_eq!(code(&o), 2, "{name}: {}", stderr(&o));
    }
}

#[test]
fn dimension_experiment_writes_crossing_sets_and_table() {
    let tmp = TempDir::new().unwrap();
    let cfg = with_tables(
        "[experiment.dimension]\nseeds = 2\nbrownian_seeds = 2\nbrownian_step_log2 = 12\nbrownian_scales = { finest = 9, coarsest = 3 }\n\
         [experiment.dimension.simulation]\nstep_log2 = 11\nj_max = 13\n",
    );
    let o = mbmlab(&["experiment", "dimension", "--out", "o", "--seed", "4"], Some(&cfg), tmp.path());
    assert!(matches!(code(&o), 0 | 1), "{}", stderr(&o));
    let dir = tmp.path().join("o/dimension");
    let table = std::fs::read_to_string(dir.join("dimension_table.csv")).unwrap();
    assert!(table.starts_with("seed_index,crossings,box_dimension,r2,bound\n"));
    assert_eq!(table.lines().count(), 3);
    assert!(dir.join("crossings/seed_000.csv").exists() && dir.join("crossings/seed_001.csv").exists());
    let manifest = read_json(&dir.join("experiment_dimension.manifest.json"));
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["files"].as_array().unwrap().len(), 4);
}
