mod common;

use approx::assert_relative_eq;
use common::{planted, ring_cores, synthetic_params};
use num_complex::Complex64;
use proptest::prelude::*;
use ringgp::config::{parse_config, Preset};
use ringgp::dynamics::{flow_potential, KineticFlow};
use ringgp::field::{self, inner_product};
use ringgp::mesh::{derive_mesh_counts, verify_admissibility};
use ringgp::potentials::PotentialParams;
use ringgp::vortex::{detect, unwrap_winding, DetectionMethod};
use ringgp::{BoundaryCondition, Field, LaplacianOperator, MeshParams, RingMesh};
use std::sync::OnceLock;

fn coarse() -> &'static (RingMesh, LaplacianOperator, LaplacianOperator) {
    static MESH: OnceLock<(RingMesh, LaplacianOperator, LaplacianOperator)> = OnceLock::new();
    MESH.get_or_init(|| {
        let mesh = RingMesh::build(&MeshParams::new(0.6, 1.4, 0.1)).unwrap();
        let d = LaplacianOperator::assemble(&mesh, BoundaryCondition::Dirichlet).unwrap();
        let n = LaplacianOperator::assemble(&mesh, BoundaryCondition::Neumann).unwrap();
        (mesh, d, n)
    })
}

fn desk() -> &'static RingMesh {
    static MESH: OnceLock<RingMesh> = OnceLock::new();
    MESH.get_or_init(common::desk_mesh)
}

fn field_from(mesh: &RingMesh, coeffs: &[f64; 6]) -> Field {
    let [a, b, c, d, e, f] = *coeffs;
    Field::from_fn(mesh, |k, x| {
        Complex64::new(a * x.x + b * (3.0 * x.y).sin() + c * ((k % 7) as f64), d * x.x * x.y + e + f * (k as f64).cos())
    })
}

fn coeffs() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(-2.0f64..2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_is_self_adjoint(a in coeffs(), b in coeffs(), neumann in any::<bool>()) {
        let (mesh, dir, neu) = coarse();
        let op = if neumann { neu } else { dir };
        let u = field_from(mesh, &a);
        let v = field_from(mesh, &b);
        let lhs = inner_product(mesh, &op.apply(&u).unwrap(), &v).unwrap();
        let rhs = inner_product(mesh, &u, &op.apply(&v).unwrap()).unwrap();
        let scale = 1.0 + lhs.abs().max(rhs.abs());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
        // negative semidefinite
        prop_assert!(inner_product(mesh, &op.apply(&u).unwrap(), &u).unwrap() <= 1e-12 * scale);
    }

    #[test]
    fn potential_flow_keeps_every_modulus(a in coeffs(), t in 0.0f64..5.0, dt in 1e-4f64..0.1, omega in -20.0f64..20.0) {
        let (mesh, _, _) = coarse();
        let u = field_from(mesh, &a);
        let params = PotentialParams { v_p: 0.3, omega, ..PotentialParams::default() };
        let out = flow_potential(mesh, &u, t, dt, &params, 100.0).unwrap();
        for (x, y) in u.values.iter().zip(&out.values) {
            prop_assert!((x.norm() - y.norm()).abs() <= 1e-15 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn kinetic_flow_is_unitary(a in coeffs(), tau in 1e-4f64..1e-1) {
        let (mesh, op, _) = coarse();
        let u = field_from(mesh, &a);
        let flow = KineticFlow::new(op, tau, 10.0).unwrap();
        let n0 = field::norm(mesh, &u).unwrap();
        let n1 = field::norm(mesh, &flow.apply(&u).unwrap()).unwrap();
        assert_relative_eq!(n0, n1, max_relative = 1e-10);
    }

    #[test]
    fn generated_meshes_are_admissible(r_min in 0.2f64..1.0, width in 0.3f64..1.5, h in 0.08f64..0.4, paper in any::<bool>()) {
        let params = MeshParams { match_paper_counts: paper, ..MeshParams::new(r_min, r_min + width, h) };
        let mesh = RingMesh::build(&params).unwrap();
        let report = verify_admissibility(&mesh);
        prop_assert!(report.pass);
        prop_assert!(report.max_orthogonality_defect < 1e-10);
        let (nc, np) = derive_mesh_counts(h, r_min, r_min + width).unwrap();
        let bands = if paper { nc } else { nc - 1 };
        prop_assert_eq!(mesh.n_triangles(), 2 * np * bands);
        let annulus = std::f64::consts::PI * ((r_min + width).powi(2) - r_min * r_min);
        prop_assert!(mesh.total_area() < annulus);
    }

    #[test]
    fn unwinding_recovers_sampled_windings(n in -4i32..=4, samples in 24usize..64, jitter in prop::collection::vec(-0.3f64..0.3, 64), amp in prop::collection::vec(0.1f64..2.0, 64)) {
        let values: Vec<Complex64> = (0..samples)
            .map(|j| {
                let theta = n as f64 * 2.0 * std::f64::consts::PI * j as f64 / samples as f64 + jitter[j];
                Complex64::from_polar(amp[j], theta)
            })
            .collect();
        prop_assert_eq!(unwrap_winding(&values).round() as i32, n);
    }

    #[test]
    fn detection_ignores_global_phase_and_flips_under_conjugation(
        signs in prop::collection::vec(prop::bool::ANY, 1..=3),
        offset in 0.0f64..std::f64::consts::TAU,
        alpha in 0.0f64..std::f64::consts::TAU,
    ) {
        let mesh = desk();
        let signs: Vec<i32> = signs.iter().map(|&s| if s { 1 } else { -1 }).collect();
        let u = planted(mesh, &ring_cores(mesh, &signs, offset), 0.1);
        let rotated = u.map(|z| z * Complex64::from_polar(1.0, alpha));
        let conj = u.conj();
        let params = synthetic_params();
        for method in [DetectionMethod::Density, DetectionMethod::RegVorticity, DetectionMethod::PseudoVorticity] {
            let base = detect(mesh, &u, method, &params).unwrap();
            let same = detect(mesh, &rotated, method, &params).unwrap();
            let flipped = detect(mesh, &conj, method, &params).unwrap();
            let key = |rs: &[ringgp::vortex::VortexRecord]| rs.iter().map(|r| (r.triangle, r.index)).collect::<Vec<_>>();
            prop_assert_eq!(key(&base), key(&same));
            prop_assert_eq!(
                key(&base).into_iter().map(|(t, i)| (t, -i)).collect::<Vec<_>>(),
                key(&flipped)
            );
        }
    }

    #[test]
    fn config_round_trips(v_p in 0.0f64..=1.0, omega in -50.0f64..50.0, gamma in 0.0f64..500.0, steps in 1usize..100_000, h in 0.01f64..0.5) {
        let mut c = Preset::Paper62.config();
        c.physics.v_p = v_p;
        c.physics.omega = omega;
        c.physics.gamma = gamma;
        c.split.steps = steps;
        c.mesh.h = h;
        prop_assert_eq!(parse_config(&c.to_ini()).unwrap(), c);
    }
}

#[test]
fn rotation_commutes_with_the_laplacian() {
    let (mesh, op, _) = coarse();
    let perm = mesh.rotation_permutation(1).unwrap();
    let u = field_from(mesh, &[0.3, -1.0, 0.2, 0.7, 0.1, -0.4]);
    let rotated = Field::from_values(mesh, perm.iter().map(|&p| u.values[p]).collect()).unwrap();
    let a = op.apply(&u).unwrap();
    let b = op.apply(&rotated).unwrap();
    for (k, &p) in perm.iter().enumerate() {
        assert!((b.values[k] - a.values[p]).norm() < 1e-9 * (1.0 + a.values[p].norm()));
    }
}
