use std::path::{Path, PathBuf};
use std::process::Command;

use pdc_cli::{validate, validate_path, CliError, RunConfig};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn small(analyses: &str) -> RunConfig {
    let text = format!(
        r#"{{
          "schema": 1,
          "pump": {{ "shape": "sech2", "center_nm": 775.0, "duration_ps": 1.7 }},
          "crystal": {{ "periodic": {{ "period_um": 46.22, "length_mm": 22.0 }} }},
          "grid": {{ "half_span_nm": 10.0, "samples": 96 }},
          "analyses": {analyses}
        }}"#
    );
    RunConfig::from_json(&text, configs()).unwrap()
}

#[test]
fn shipped_configs_validate_clean() {
    for name in ["ppktp_purity", "ppktp_full", "aktp_engineer", "aktp_full"] {
        let d = validate_path(configs().join(format!("{name}.json"))).unwrap();
        assert!(d.is_empty(), "{name}: {d:?}");
    }
}

#[test]
fn bad_config_names_each_problem() {
    let d = validate_path(configs().join("infeasible.json")).unwrap();
    let codes: Vec<&str> = d.iter().map(|d| d.code).collect();
    assert!(codes.contains(&"grid_out_of_range"), "{codes:?}");
    assert!(codes.contains(&"infeasible_anneal"), "{codes:?}");
    assert!(codes.contains(&"filter_off_degeneracy"), "{codes:?}");
}

#[test]
fn unreadable_config_is_an_error() {
    assert!(matches!(validate_path("/definitely/not/here.json"), Err(CliError::Config(_))));
}

#[test]
fn schema_version_is_checked() {
    let text = std::fs::read_to_string(configs().join("ppktp_purity.json")).unwrap().replace("\"schema\": 1", "\"schema\": 2");
    assert!(RunConfig::from_json(&text, configs()).is_err());
}

#[test]
fn seed_required_for_stochastic_stages() {
    let cfg = small(r#"[{ "kind": "jitter_mc", "fwhm_um": 1.0, "trials": 2 }]"#);
    assert!(validate(&cfg).iter().any(|d| d.code == "missing_seed"));
}

#[test]
fn missing_material_fails_before_computing() {
    let mut cfg = small(r#"[{ "kind": "purity" }]"#);
    cfg.material = Some("no_such_material.json".into());
    let dir = tempfile::tempdir().unwrap();
    let err = pdc_cli::run(&cfg, &dir.path().join("out")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn empty_analysis_list_writes_only_the_manifest() {
    let cfg = small("[]");
    let dir = tempfile::tempdir().unwrap();
    let m = pdc_cli::run(&cfg, dir.path()).unwrap();
    assert!(m.outputs.is_empty());
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 1);
}

#[test]
fn compute_failure_removes_partial_outputs() {
    // Cropping 96 samples to 1% leaves too few points, after purity.json exists.
    let cfg = small(r#"[{ "kind": "purity" }, { "kind": "restricted_window", "shrink_factor": 0.01 }]"#);
    let dir = tempfile::tempdir().unwrap();
    let err = pdc_cli::run(&cfg, dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("restricted_window"), "{err}");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn manifest_hashes_every_output() {
    let cfg = small(r#"[{ "kind": "purity" }, { "kind": "tradeoff", "shape": "rect", "ratios": [1.0, 2.0] }]"#);
    let dir = tempfile::tempdir().unwrap();
    let m = pdc_cli::run(&cfg, dir.path()).unwrap();
    let names: Vec<&str> = m.outputs.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(names, ["stack.json", "marginals.csv", "purity.json", "tradeoff.csv"]);
    for f in &m.outputs {
        let bytes = std::fs::read(dir.path().join(&f.path)).unwrap();
        assert_eq!(bytes.len() as u64, f.bytes);
        assert_eq!(f.sha256.len(), 64);
    }
    let on_disk: pdc_cli::Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk, m);
    let tradeoff = std::fs::read_to_string(dir.path().join("tradeoff.csv")).unwrap();
    assert_eq!(tradeoff.lines().count(), 3);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_pdcsim");
    let ok = Command::new(bin)
        .args(["validate", "--config"])
        .arg(configs().join("ppktp_purity.json"))
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));
    let bad = Command::new(bin)
        .args(["validate", "--config"])
        .arg(configs().join("infeasible.json"))
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("infeasible_anneal"));
}

#[test]
fn engineer_then_show_stack() {
    let text = std::fs::read_to_string(configs().join("aktp_engineer.json"))
        .unwrap()
        .replace("\"iterations\": 200000", "\"iterations\": 2000");
    let cfg = RunConfig::from_json(&text, configs()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = pdc_cli::engineer(&cfg, dir.path()).unwrap();
    assert!(m.metrics["anneal_fidelity"] >= m.metrics["anneal_initial_fidelity"]);
    let stack = dir.path().join("stack.json");
    let profile = pdc_cli::show_stack(&stack, &dir.path().join("profile"), None, Some(50)).unwrap();
    let text = std::fs::read_to_string(profile).unwrap();
    assert_eq!(text.lines().next(), Some("x_mm,re,im,abs"));
    assert_eq!(text.lines().count(), 51);
    let last: f64 = text.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((last - 29.0).abs() < 1e-9);
}

#[test]
fn engineer_rejects_fixed_crystals() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pdc_cli::engineer(&small("[]"), dir.path()).unwrap_err().exit_code(), 2);
}
