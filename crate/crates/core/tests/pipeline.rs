use std::path::Path;

use cwave::config::{validate_with_overrides, RunConfig};
use cwave::decay::DecayOutcome;
use cwave::io::{read_json, sha256_hex, RunManifest, MANIFEST};
use cwave::pipeline::{run_pipeline, AnalyzeReport, Stage};

fn small(extra: &[&str]) -> RunConfig {
    let mut o: Vec<String> = [
        "grid.n1=256",
        "grid.transverse=[8]",
        "grid.half_width=60",
        "t_end=20",
        "fits.power_window=[5,20]",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    o.extend(extra.iter().map(|s| s.to_string()));
    validate_with_overrides(&RunConfig::default().canonical(), &o).unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    read_json(&dir.join(MANIFEST)).unwrap()
}

#[test]
fn profiles_stage_lists_its_outputs_with_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_pipeline(&RunConfig::default(), Stage::Profiles, dir.path()).unwrap();
    assert!(m.complete && m.all_pass(), "{:?}", m.checks);
    let names: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    for want in ["config.json", "profiles.csv", "profile_norms.csv", "interface.csv", "profiles.json"] {
        assert!(names.contains(&want), "{want} missing from {names:?}");
    }
    for f in &m.files {
        let bytes = std::fs::read(dir.path().join(&f.path)).unwrap();
        assert_eq!(f.bytes, bytes.len() as u64);
        assert_eq!(f.sha256, sha256_hex(&bytes));
    }
    assert_eq!(manifest(dir.path()).config_hash, RunConfig::default().hash());
}

#[test]
fn unperturbed_run_has_nothing_transverse_to_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(&["modes=[]"]);
    run_pipeline(&cfg, Stage::Simulate, dir.path()).unwrap();
    run_pipeline(&cfg, Stage::Analyze, dir.path()).unwrap();
    let fits: AnalyzeReport = read_json(&dir.path().join("fits.json")).unwrap();
    assert_eq!(fits.nonzero.outcome, Some(DecayOutcome::AlreadyConverged));
    assert!(matches!(fits.main.outcome, Some(DecayOutcome::Fitted(_))));
}

#[test]
fn repeated_runs_are_bit_identical() {
    let cfg = small(&[]);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run_pipeline(&cfg, Stage::Simulate, a.path()).unwrap();
    let mb = run_pipeline(&cfg, Stage::Simulate, b.path()).unwrap();
    assert_eq!(ma.files, mb.files);
    let csv = std::fs::read(a.path().join("norms.csv")).unwrap();
    assert_eq!(csv, std::fs::read(b.path().join("norms.csv")).unwrap());
    assert!(ma.files.iter().any(|f| f.path.starts_with("fields/")));
}

#[test]
fn failed_stage_still_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(&[]);
    // analyze without a preceding simulate has no norms to read
    assert!(run_pipeline(&cfg, Stage::Analyze, dir.path()).is_err());
    let m = manifest(dir.path());
    assert!(!m.complete && !m.all_pass());
    assert!(m.error.is_some());
}

#[test]
fn config_errors_are_collected() {
    let err = validate_with_overrides(
        &RunConfig::default().canonical(),
        &["grid.half_width=10".into(), "diffusion=[[1,0],[0,-1]]".into(), "t_end=-1".into()],
    )
    .unwrap_err();
    match err {
        cwave::Error::Config(list) => assert!(list.len() >= 2, "{list:?}"),
        e => panic!("unexpected {e}"),
    }
}
