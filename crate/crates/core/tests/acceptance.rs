//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Exits nonzero on any failure only when `ACCEPTANCE_STRICT` is set, so the
//! target can sit inside `cargo test` while still reporting honestly.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{desk_mesh, planted, ring_cores, synthetic_params};
use ringgp::dynamics::{evolve, flow_potential, KineticFlow};
use ringgp::field::{self, inner_product};
use ringgp::harness::{self, build_mesh, ground_state_stage, initial_state};
use ringgp::mesh::verify_admissibility;
use ringgp::spectral::modes::{decompose, mode_basis};
use ringgp::spectral::radial::radial_modes;
use ringgp::spectral::annulus_eigenpairs;
use ringgp::vortex::{detect, DetectionMethod, VortexRecord};
use ringgp::{BoundaryCondition, Field, LaplacianOperator, MeshParams, RingMesh, RunConfig};

type Outcome = Result<(bool, String), String>;

fn err(e: ringgp::Error) -> String {
    e.to_string()
}

fn desk_config() -> RunConfig {
    RunConfig {
        mesh: MeshParams::new(0.6, 1.4, 0.06),
        ..RunConfig::default()
    }
}

fn random_field(mesh: &RingMesh, rng: &mut ChaCha8Rng) -> Field {
    Field::from_fn(mesh, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn mesh_counts() -> Outcome {
    let params = MeshParams {
        match_paper_counts: true,
        ..MeshParams::new(0.4, 1.6, 0.05)
    };
    let (_, np) = params.resolved_counts().map_err(err)?;
    let mesh = RingMesh::build(&params).map_err(err)?;
    let report = verify_admissibility(&mesh);
    let n = mesh.n_triangles();
    Ok((
        np == 297 && n == 14850 && report.max_angle < PI / 2.0,
        format!("N_p={np} N={n} max angle {:.6}", report.max_angle),
    ))
}

fn admissibility_and_symmetry() -> Outcome {
    let fig3 = MeshParams {
        match_paper_counts: true,
        ..MeshParams::new(0.4, 1.6, 0.05)
    };
    let mut meshes = vec![fig3, MeshParams::new(0.6, 1.4, 0.06), RunConfig::default().mesh];
    meshes.extend([0.1, 0.05, 0.025].map(|h| MeshParams::new(0.6, 1.4, h)));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut defect, mut asym, mut abs_asym) = (0.0f64, 0.0f64, 0.0f64);
    for params in &meshes {
        let mesh = RingMesh::build(params).map_err(err)?;
        defect = defect.max(verify_admissibility(&mesh).max_orthogonality_defect);
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
            let op = LaplacianOperator::assemble(&mesh, bc).map_err(err)?;
            for _ in 0..100 {
                let u = random_field(&mesh, &mut rng);
                let v = random_field(&mesh, &mut rng);
                let au = op.apply(&u).map_err(err)?;
                let av = op.apply(&v).map_err(err)?;
                let left = inner_product(&mesh, &au, &v).map_err(err)?;
                let right = inner_product(&mesh, &u, &av).map_err(err)?;
                let scale = field::norm(&mesh, &au).map_err(err)? * field::norm(&mesh, &v).map_err(err)?;
                asym = asym.max((left - right).abs() / scale);
                abs_asym = abs_asym.max((left - right).abs());
            }
        }
    }
    Ok((
        defect < 1e-10 && asym < 1e-12,
        format!("{} meshes, orthogonality defect {defect:.2e}, relative asymmetry {asym:.2e} (absolute {abs_asym:.2e})", meshes.len()),
    ))
}

fn space_order() -> Outcome {
    let s = harness::run_space_convergence(&RunConfig::default()).map_err(err)?;
    let ok = s.slopes.len() == 3 && s.slopes.iter().all(|&(_, sl)| (0.7..=1.3).contains(&sl));
    let text: Vec<String> = s.slopes.iter().map(|(b, sl)| format!("beta={b}: {sl:.3}")).collect();
    Ok((ok, format!("slopes {}", text.join(", "))))
}

fn time_order() -> Outcome {
    let mut config = desk_config();
    config.harness.time_t_max = 0.1;
    config.harness.time_k = vec![8, 9, 10];
    let rows = harness::run_time_convergence(&config).map_err(err)?;
    let ok = rows.len() == 3 && rows.iter().all(|r| (1.9..=2.1).contains(&r.m_phi));
    let text: Vec<String> = rows.iter().map(|r| format!("k={}: {:.4}", r.k, r.m_phi)).collect();
    Ok((ok, format!("m_phi {}", text.join(", "))))
}

fn ground_state_quality() -> Outcome {
    let config = desk_config();
    let (mesh, op) = build_mesh(&config).map_err(err)?;
    let gs = ground_state_stage(&config, &mesh, &op).map_err(err)?;
    let decreasing = gs.energy_history.windows(2).all(|w| w[1] < w[0]);
    let np = mesh.layout.as_ref().map(|l| l.n_points).ok_or("mesh has no ring layout")?;
    let mut asym = 0.0f64;
    for shift in 1..np {
        let perm = mesh.rotation_permutation(shift).ok_or("no rotation permutation")?;
        for (k, &j) in perm.iter().enumerate() {
            asym = asym.max((gs.state.values[j] - gs.state.values[k]).norm());
        }
    }
    Ok((
        decreasing && gs.converged && gs.residual <= config.flow.epsilon && asym <= 1e-6,
        format!(
            "{} steps, energy decreasing {decreasing}, residual {:.3e}, rotation asymmetry {asym:.2e}",
            gs.iterations, gs.residual
        ),
    ))
}

fn ground_state_stability() -> Outcome {
    let mut config = desk_config();
    config.physics.v_p = 0.0;
    config.split.t_max = 1.0;
    config.split.steps = 1667;
    config.split.snapshot_stride = 10;
    let (mesh, op) = build_mesh(&config).map_err(err)?;
    let gs = ground_state_stage(&config, &mesh, &op).map_err(err)?;
    let traj = evolve(&mesh, &op, &gs.state, &config.potential(), &config.split_step(), Some(&gs.state), |_| Ok(()))
        .map_err(err)?;
    let m0 = traj.observables[0].mass;
    let err_gs = traj.observables.iter().filter_map(|o| o.err_gs).fold(0.0, f64::max);
    let drift = traj.observables.iter().map(|o| (o.mass - m0).abs()).fold(0.0, f64::max);
    Ok((
        err_gs <= 5e-4 && drift <= 1e-8,
        format!("max err_GS {err_gs:.3e}, max mass drift {drift:.2e} over {} steps", traj.steps),
    ))
}

/// Density-method records at every snapshot of a run.
fn nucleation_run(config: &RunConfig) -> Result<Vec<(f64, Vec<VortexRecord>)>, String> {
    let (mesh, op) = build_mesh(config).map_err(err)?;
    let gs = ground_state_stage(config, &mesh, &op).map_err(err)?;
    if !gs.converged {
        return Err(format!("ground state did not converge (residual {:.3e})", gs.residual));
    }
    let u0 = initial_state(config, &mesh, &gs.state).map_err(err)?;
    let params = config.detection();
    let mut found = Vec::new();
    evolve(&mesh, &op, &u0, &config.potential(), &config.split_step(), None, |s| {
        found.push((s.t, detect(&mesh, &s.state, DetectionMethod::Density, &params)?));
        Ok(())
    })
    .map_err(err)?;
    Ok(found)
}

fn vortex_nucleation() -> Outcome {
    let mut config = desk_config();
    config.split.snapshot_stride = 100;
    let forced = nucleation_run(&config)?;
    let all: Vec<&VortexRecord> = forced.iter().flat_map(|(_, r)| r).collect();
    let first = forced.iter().find(|(_, r)| !r.is_empty()).map(|(t, _)| *t);
    let indices_ok = all.iter().all(|r| r.index == 1 || r.index == -1);

    let mut slow = config.clone();
    slow.physics.omega = PI;
    let mut linear = config.clone();
    linear.physics.gamma = 0.0;
    let slow_count: usize = nucleation_run(&slow)?.iter().map(|(_, r)| r.len()).sum();
    let linear_count: usize = nucleation_run(&linear)?.iter().map(|(_, r)| r.len()).sum();
    Ok((
        !all.is_empty() && indices_ok && slow_count == 0 && linear_count == 0,
        format!(
            "{} records over {} snapshots, first at t={}, indices in {{-1,+1}} {indices_ok}; controls omega=pi {slow_count}, gamma=0 {linear_count}",
            all.len(),
            forced.len(),
            first.map_or("none".to_string(), |t| format!("{t:.3}")),
        ),
    ))
}

fn detector_consistency() -> Outcome {
    let mesh = desk_mesh();
    let params = synthetic_params();
    let configurations: [&[i32]; 6] = [&[1], &[-1], &[1, -1], &[1, 1, -1], &[1, -1, 1, -1], &[-1, -1, -1, -1]];
    let methods = [
        DetectionMethod::Density,
        DetectionMethod::RegVorticity,
        DetectionMethod::PseudoVorticity,
    ];
    let mut failures = Vec::new();
    for (c, windings) in configurations.iter().enumerate() {
        let cores = ring_cores(&mesh, windings, 0.3 + c as f64);
        let u = planted(&mesh, &cores, 0.1);
        let mut expected = windings.to_vec();
        expected.sort();
        for method in methods {
            let found = detect(&mesh, &u, method, &params).map_err(err)?;
            let mut signs: Vec<i32> = found.iter().map(|r| r.index).collect();
            signs.sort();
            let exact = method != DetectionMethod::Density
                || found
                    .iter()
                    .all(|r| cores.iter().any(|&(k, s)| k == r.triangle && s == r.index));
            if signs != expected || !exact {
                failures.push(format!("{method} on {windings:?} gave {signs:?}"));
            }
        }
    }
    Ok((
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} configurations x 3 methods agree", configurations.len())
        } else {
            failures.join("; ")
        },
    ))
}

fn mode_machinery() -> Outcome {
    let config = desk_config();
    let mesh = RingMesh::build(&config.mesh).map_err(err)?;
    let m = &config.modes;
    let basis = mode_basis(&mesh, m.p_max, m.l_max, m.n_radial, &config.radial()).map_err(err)?;
    let off = basis.max_off_pair_pairing(&mesh);
    // same-order pairs at |ℓ| <= 40, where the radial sampling rather than
    // wall-hugging high-ℓ profiles dominates
    let mut low = 0.0f64;
    for ell in 0..=(m.l_max.min(40) as i32) {
        for p in 0..=m.p_max {
            for q in p + 1..=m.p_max {
                let z = field::complex_pairing(&mesh, basis.field(p, ell), basis.field(q, ell)).map_err(err)?;
                low = low.max(z.norm());
            }
        }
    }
    let mut self_dev = 0.0f64;
    for (i, (p, ell)) in basis.labels().enumerate() {
        let c = decompose(&mesh, &basis.fields[i], &basis).map_err(err)?;
        self_dev = self_dev.max((c.get(p, ell) - 1.0).norm());
    }
    let free = ringgp::spectral::radial::RadialParams { v0: 0.0, ..config.radial() };
    let mut eig_dev = 0.0f64;
    for ell in 0..=3u32 {
        let fd = radial_modes(ell as i32, 2, m.n_radial, &free).map_err(err)?;
        let exact = annulus_eigenpairs(ell, 3, free.r_min, free.r_max).map_err(err)?;
        for (l, e) in fd.eigenvalues.iter().zip(&exact) {
            eig_dev = eig_dev.max((2.0 * free.m * l - e.lambda).abs() / e.lambda);
        }
    }
    Ok((
        off <= 1e-3 && self_dev <= 1e-3 && eig_dev <= 5e-3,
        format!(
            "P={} L={} N={}: max off-pair {off:.3e} ({low:.3e} for |ell| <= 40), self-coefficient deviation {self_dev:.1e}, Bessel vs FD {:.3}%",
            m.p_max,
            m.l_max,
            mesh.n_triangles(),
            100.0 * eig_dev
        ),
    ))
}

fn unitarity() -> Outcome {
    let config = desk_config();
    let (mesh, op) = build_mesh(&config).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut u = random_field(&mesh, &mut rng);
    field::normalize(&mesh, &mut u).map_err(err)?;
    let split = config.split_step();
    let pot = config.potential();
    let mut modulus = 0.0f64;
    for j in 0..10 {
        let out = flow_potential(&mesh, &u, j as f64 * split.tau, split.tau, &pot, config.physics.gamma).map_err(err)?;
        for (a, b) in u.values.iter().zip(&out.values) {
            modulus = modulus.max((a.norm() - b.norm()).abs());
        }
    }
    let flow = KineticFlow::new(&op, split.tau, config.physics.m).map_err(err)?;
    let n0 = field::norm(&mesh, &u).map_err(err)?;
    let (mut per_step, mut prev) = (0.0f64, n0);
    for _ in 0..1000 {
        u = flow.apply(&u).map_err(err)?;
        let n = field::norm(&mesh, &u).map_err(err)?;
        per_step = per_step.max((n - prev).abs());
        prev = n;
    }
    let total = (prev - n0).abs();
    Ok((
        modulus <= 1e-15 && per_step <= 1e-10 && total <= 1e-8,
        format!("pointwise modulus {modulus:.1e}, norm per step {per_step:.1e}, over 1000 steps {total:.1e}"),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("mesh counts", mesh_counts),
        ("admissibility and symmetry", admissibility_and_symmetry),
        ("space order", space_order),
        ("time order", time_order),
        ("ground-state quality", ground_state_quality),
        ("ground-state stability", ground_state_stability),
        ("vortex nucleation", vortex_nucleation),
        ("detector consistency", detector_consistency),
        ("mode machinery", mode_machinery),
        ("unitarity", unitarity),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(_) => Err("panicked".to_string()),
        };
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} ({secs:.1} s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
