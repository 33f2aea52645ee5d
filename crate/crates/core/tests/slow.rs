//! Full-resolution reproduction; hours on a single core.
//! Run with `cargo test --release -p ringgp --test slow -- --ignored`.

use ringgp::harness::{build_mesh, ground_state_stage, initial_state};
use ringgp::vortex::{detect, DetectionMethod};
use ringgp::RunConfig;

#[test]
#[ignore]
fn full_resolution_stirring_nucleates_twelve_vortices() {
    let config = RunConfig::default();
    let (mesh, op) = build_mesh(&config).unwrap();
    assert_eq!(mesh.n_triangles(), 39852);
    let gs = ground_state_stage(&config, &mesh, &op).unwrap();
    assert!(gs.converged);
    let u0 = initial_state(&config, &mesh, &gs.state).unwrap();
    let traj = ringgp::dynamics::evolve(
        &mesh,
        &op,
        &u0,
        &config.potential(),
        &config.split_step(),
        None,
        |_| Ok(()),
    )
    .unwrap();
    let found = detect(&mesh, &traj.final_state, DetectionMethod::Density, &config.detection()).unwrap();
    let plus = found.iter().filter(|r| r.index == 1).count();
    let minus = found.iter().filter(|r| r.index == -1).count();
    assert_eq!((plus, minus), (6, 6), "{found:?}");
}
