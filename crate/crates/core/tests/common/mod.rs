#![allow(dead_code)]

use num_complex::Complex64;
use ringgp::vortex::DetectionParams;
use ringgp::{BoundaryCondition, Field, MeshParams, RingMesh, Vec2};

pub fn desk_mesh() -> RingMesh {
    RingMesh::build(&MeshParams::new(0.6, 1.4, 0.06)).unwrap()
}

/// Triangle whose circumcenter is closest to `p`.
pub fn nearest(mesh: &RingMesh, p: Vec2) -> usize {
    (0..mesh.n_triangles())
        .min_by(|&a, &b| mesh.circumcenters[a].distance(p).total_cmp(&mesh.circumcenters[b].distance(p)))
        .unwrap()
}

/// Unit-amplitude field with `tanh` cores of width `xi` at the given
/// triangles' circumcenters, each with the given winding sign.
pub fn planted(mesh: &RingMesh, cores: &[(usize, i32)], xi: f64) -> Field {
    Field::from_fn(mesh, |_, x| {
        cores.iter().fold(Complex64::new(1.0, 0.0), |acc, &(k, s)| {
            let c = mesh.circumcenters[k];
            let d = x - c;
            let r = d.norm();
            if r == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let phase = Complex64::new(d.x / r, s.signum() as f64 * d.y / r);
            acc * phase * (r / xi).tanh()
        })
    })
}

/// Cores spread evenly around the middle circle.
pub fn ring_cores(mesh: &RingMesh, signs: &[i32], offset: f64) -> Vec<(usize, i32)> {
    let n = signs.len() as f64;
    signs
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let theta = offset + 2.0 * std::f64::consts::PI * j as f64 / n;
            (nearest(mesh, Vec2::from_polar(1.0, theta)), s)
        })
        .collect()
}

/// Detection parameters for synthetic fields that do not vanish on the boundary.
pub fn synthetic_params() -> DetectionParams {
    DetectionParams {
        bc: BoundaryCondition::Neumann,
        ..DetectionParams::default()
    }
}
