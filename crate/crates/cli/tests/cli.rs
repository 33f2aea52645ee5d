use std::fs;
use std::process::Command;

const TINY: &str = "\
[mesh]
r_min = 0.6
r_max = 1.4
h = 0.15

[split]
t_max = 0.02
steps = 10
snapshot_stride = 5

[modes]
p_max = 1
l_max = 3
n_radial = 80

[harness]
space_h = 0.2, 0.15, 0.1
space_betas = 1
time_t_max = 0.01
time_k = 3, 4
";

fn ringgp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ringgp"))
}

#[test]
fn subcommands_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.ini");
    fs::write(&cfg, TINY).unwrap();
    let cases: [(&[&str], &str); 7] = [
        (&["mesh"], "mesh/triangles.csv"),
        (&["ground-state"], "ground_state/summary.json"),
        (&["evolve", "--detect"], "vortices.csv"),
        (&["modes"], "modes/coefficients.csv"),
        (&["conv-space"], "space_slopes.csv"),
        (&["conv-time"], "time_convergence.csv"),
        (&["pipeline"], "summary.json"),
    ];
    for (args, artifact) in cases {
        let out = dir.path().join(args[0]);
        let status = ringgp()
            .args(args)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--threads", "2"])
            .status()
            .unwrap();
        assert!(status.success(), "{args:?}");
        assert!(out.join(artifact).exists(), "{args:?} did not write {artifact}");
        assert!(out.join("manifest.json").exists());
    }
    let field = dir.path().join("evolve/snapshots/step_000010.csv");
    let out = dir.path().join("vortices");
    let status = ringgp()
        .args(["vortices", "--field"])
        .arg(&field)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("pseudo_vorticity.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ini");
    fs::write(&bad, TINY.replace("h = 0.15", "h = 0.15\nv_p = 0.1")).unwrap();
    let out = ringgp().arg("mesh").arg("--config").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));

    let out = ringgp().args(["mesh", "--preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("missing.ini");
    let out = ringgp().arg("mesh").arg("--config").arg(&missing).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.ini");
    fs::write(&cfg, format!("{TINY}\n[flow]\nmax_iters = 1\n")).unwrap();
    let out = ringgp()
        .arg("pipeline")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
