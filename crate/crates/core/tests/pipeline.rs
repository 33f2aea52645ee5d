use std::fs;
use std::path::Path;

use ringgp::config::{parse_config_over, Preset, RunConfig};
use ringgp::harness::run_pipeline;
use ringgp::output::sha256_hex;

fn tiny(dir: &Path, preset: Preset) -> RunConfig {
    let text = "\
[mesh]
r_min = 0.6
r_max = 1.4
h = 0.15
n_circles = none
n_points = none
match_paper_counts = false

[split]
t_max = 0.05
steps = 20
snapshot_stride = 10

[modes]
p_max = 1
l_max = 4
n_radial = 100
";
    let mut c = parse_config_over(text, preset.config()).unwrap();
    c.output.dir = dir.to_path_buf();
    c
}

fn manifest_files(dir: &Path) -> Vec<(String, String)> {
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["path"].as_str().unwrap().to_string(), f["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn pipeline_outputs_are_deterministic_and_fully_listed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = run_pipeline(&tiny(a.path(), Preset::Paper62)).unwrap();
    let sb = run_pipeline(&tiny(b.path(), Preset::Paper62)).unwrap();
    assert_eq!(sa, sb);
    assert!(sa.ground_state.converged);
    assert!(sa.evolution.max_mass_drift < 1e-10);

    let files = manifest_files(a.path());
    let mut on_disk = Vec::new();
    for entry in walk(a.path()) {
        let rel = entry.strip_prefix(a.path()).unwrap().to_string_lossy().replace('\\', "/");
        if rel != "manifest.json" {
            on_disk.push(rel);
        }
    }
    on_disk.sort();
    let mut listed: Vec<String> = files.iter().map(|(p, _)| p.clone()).collect();
    listed.sort();
    assert_eq!(listed, on_disk);

    for (path, hash) in &files {
        let bytes = fs::read(a.path().join(path)).unwrap();
        assert_eq!(&sha256_hex(&bytes), hash, "{path}");
        if path.ends_with(".csv") || path.ends_with(".vtk") {
            assert_eq!(bytes, fs::read(b.path().join(path)).unwrap(), "{path} differs between runs");
        }
    }
    for expected in ["mesh/triangles.csv", "ground_state/field.csv", "observables.csv", "vortices.csv", "modes/coefficients.csv", "snapshots/step_000020.vtk"] {
        assert!(files.iter().any(|(p, _)| p == expected), "{expected} missing");
    }
}

#[test]
fn neumann_preset_runs_from_the_flat_state() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_pipeline(&tiny(dir.path(), Preset::UnstableNeumann)).unwrap();
    // without a trap the ground state is the normalized constant
    assert!(s.ground_state.converged);
    assert_eq!(s.ground_state.iterations, 0);
    assert!(s.evolution.max_mass_drift < 1e-10);
}

#[test]
fn stage_failures_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(dir.path(), Preset::Paper62);
    c.flow.max_iters = 1;
    let err = run_pipeline(&c).unwrap_err();
    assert!(err.to_string().starts_with("ground_state: not converged"), "{err}");
    assert!(!err.is_config_error());
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}
