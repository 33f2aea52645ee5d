mod common;

use common::{desk_mesh, planted, ring_cores, synthetic_params};
use num_complex::Complex64;
use ringgp::vortex::{detect, net_charge, DetectionMethod, VortexRecord};

// Cores narrower than about 1.5h are under-resolved by the discrete curl;
// wider ones drop the pseudo-vorticity peak 1/ξ² below the threshold.
const XI: f64 = 0.1;

const METHODS: [DetectionMethod; 3] = [
    DetectionMethod::Density,
    DetectionMethod::RegVorticity,
    DetectionMethod::PseudoVorticity,
];

fn signs(records: &[VortexRecord]) -> Vec<i32> {
    let mut s: Vec<i32> = records.iter().map(|r| r.index).collect();
    s.sort();
    s
}

#[test]
fn all_detectors_agree_on_planted_configurations() {
    let mesh = desk_mesh();
    let params = synthetic_params();
    let configurations: [&[i32]; 6] = [&[1], &[-1], &[1, -1], &[1, 1, -1], &[1, -1, 1, -1], &[-1, -1, -1, -1]];
    for (c, windings) in configurations.iter().enumerate() {
        let cores = ring_cores(&mesh, windings, 0.3 + c as f64);
        let u = planted(&mesh, &cores, XI);
        let mut expected: Vec<i32> = windings.to_vec();
        expected.sort();
        for method in METHODS {
            let found = detect(&mesh, &u, method, &params).unwrap();
            assert_eq!(signs(&found), expected, "{method} on {windings:?}: {found:?}");
            assert_eq!(net_charge(&found), windings.iter().sum::<i32>());
            for r in &found {
                let closest = cores
                    .iter()
                    .map(|&(k, _)| mesh.circumcenters[k].distance(r.position))
                    .fold(f64::INFINITY, f64::min);
                assert!(closest < 0.1, "{method}: record {r:?} far from every core");
            }
        }
        let density = detect(&mesh, &u, DetectionMethod::Density, &params).unwrap();
        for r in &density {
            let core = cores.iter().find(|&&(k, _)| k == r.triangle).expect("density record on a core triangle");
            assert_eq!(r.index, core.1);
            assert!(r.reliable);
        }
    }
}

#[test]
fn doubly_charged_core_has_index_two() {
    let mesh = desk_mesh();
    let cores = ring_cores(&mesh, &[1], 0.0);
    let single = planted(&mesh, &cores, XI);
    let double = single.map(|z| z * z);
    let found = detect(&mesh, &double, DetectionMethod::Density, &synthetic_params()).unwrap();
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].index, 2);
}

#[test]
fn uniform_phase_field_has_no_vortices() {
    let mesh = desk_mesh();
    let u = ringgp::Field::from_fn(&mesh, |_, x| Complex64::from_polar(1.0, 2.0 * x.x));
    for method in METHODS {
        assert!(detect(&mesh, &u, method, &synthetic_params()).unwrap().is_empty(), "{method}");
    }
}
