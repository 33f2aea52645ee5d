//! Orchestration: convergence studies and the end-to-end pipeline
//! (mesh, ground state, evolution, detection, mode decomposition).

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::config::{InitialState, RunConfig};
use crate::dynamics::{self, evolve, make_unstable_state, order_estimate, Observables};
use crate::error::{Error, Result};
use crate::field::{self, Field};
use crate::fv::{BoundaryCondition, LaplacianOperator};
use crate::ground_state::{compute_ground_state, GroundStateResult};
use crate::mesh::{verify_admissibility, AdmissibilityReport, MeshParams, RingMesh};
use crate::output::{self, fmt_f64, ArtifactWriter};
use crate::potentials::{eval_trap, PotentialParams};
use crate::spectral::{annulus_eigenfunction_field, annulus_eigenpairs, project_onto_modes, ModeCoefficients};
use crate::vortex::{self, DetectionMethod, VortexRecord};

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceRow {
    pub h: f64,
    pub n_triangles: usize,
    pub beta: u32,
    pub lambda: f64,
    /// `‖-A_T U - λ U‖_{L²(T)}` for the sampled Bessel eigenfunction.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceConvergence {
    pub rows: Vec<SpaceRow>,
    /// `(β, fitted slope)`.
    pub slopes: Vec<(u32, f64)>,
}

/// Residual of the radially symmetric (`α = 0`) Dirichlet eigenfunctions
/// under the discrete operator, over the configured resolutions.
pub fn run_space_convergence(config: &RunConfig) -> Result<SpaceConvergence> {
    let hs = &config.harness.space_h;
    let betas = &config.harness.space_betas;
    if hs.len() < 3 {
        return Err(Error::param("space_h", "at least three resolutions are needed"));
    }
    let count = betas.iter().copied().max().unwrap_or(0) as usize;
    let (r_min, r_max) = (config.mesh.r_min, config.mesh.r_max);
    let pairs = annulus_eigenpairs(0, count, r_min, r_max)?;
    let mut rows = Vec::new();
    for &h in hs {
        let mesh = RingMesh::build(&MeshParams::new(r_min, r_max, h))?;
        let op = LaplacianOperator::assemble(&mesh, BoundaryCondition::Dirichlet)?;
        for &beta in betas {
            let pair = &pairs[beta as usize - 1];
            let u = annulus_eigenfunction_field(&mesh, pair, 1)?;
            let au = op.apply(&u)?;
            let r: Vec<_> = au.values.iter().zip(&u.values).map(|(a, b)| -a - b * pair.lambda).collect();
            rows.push(SpaceRow {
                h,
                n_triangles: mesh.n_triangles(),
                beta,
                lambda: pair.lambda,
                residual: field::norm_raw(&mesh.areas, &r),
            });
        }
    }
    let slopes = betas
        .iter()
        .map(|&beta| {
            let (x, y): (Vec<f64>, Vec<f64>) =
                rows.iter().filter(|r| r.beta == beta).map(|r| (r.h, r.residual)).unzip();
            (beta, loglog_slope(&x, &y))
        })
        .collect();
    Ok(SpaceConvergence { rows, slopes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeRow {
    pub k: u32,
    pub steps: usize,
    pub m_phi: f64,
}

/// Trap-only dynamics from `u0` to `T_max` with `J/2`, `J` and `2J` steps,
/// `J = 2^k`, and the resulting order estimate.
pub fn time_order_row(
    mesh: &RingMesh,
    op: &LaplacianOperator,
    u0: &Field,
    potential: &PotentialParams,
    config: &RunConfig,
    k: u32,
) -> Result<TimeRow> {
    let t_max = config.harness.time_t_max;
    let j = 1usize << k;
    let run = |steps: usize| -> Result<Field> {
        let cfg = dynamics::SplitStepConfig {
            tau: t_max / steps as f64,
            t_max,
            m: config.physics.m,
            gamma: config.physics.gamma,
            snapshot_stride: 0,
            fuse_b_steps: config.split.fuse_b_steps,
        };
        Ok(evolve(mesh, op, u0, potential, &cfg, None, |_| Ok(()))?.final_state)
    };
    let coarse = run((j / 2).max(1))?;
    let mid = run(j)?;
    let fine = run(2 * j)?;
    Ok(TimeRow {
        k,
        steps: j,
        m_phi: order_estimate(mesh, &coarse, &mid, &fine)?,
    })
}

/// Order estimate per configured `k`, starting from the ground state of the
/// configured mesh with the rotating part of the potential switched off.
pub fn run_time_convergence(config: &RunConfig) -> Result<Vec<TimeRow>> {
    let (mesh, op) = build_mesh(config)?;
    let gs = ground_state_stage(config, &mesh, &op)?;
    let trap = config.trap();
    config
        .harness
        .time_k
        .iter()
        .map(|&k| time_order_row(&mesh, &op, &gs.state, &trap, config, k))
        .collect()
}

pub fn build_mesh(config: &RunConfig) -> Result<(RingMesh, LaplacianOperator)> {
    let mesh = RingMesh::build(&config.mesh)?;
    let op = LaplacianOperator::assemble(&mesh, config.bc)?;
    Ok((mesh, op))
}

pub fn ground_state_stage(config: &RunConfig, mesh: &RingMesh, op: &LaplacianOperator) -> Result<GroundStateResult> {
    let v = eval_trap(mesh, &config.trap());
    compute_ground_state(&config.gradient_flow(), op, &v, config.physics.m, None)
}

pub fn initial_state(config: &RunConfig, mesh: &RingMesh, gs: &Field) -> Result<Field> {
    match config.split.initial {
        InitialState::GroundState => Ok(gs.clone()),
        InitialState::Unstable => make_unstable_state(gs, mesh),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundStateSummary {
    pub n_triangles: usize,
    pub converged: bool,
    pub iterations: usize,
    pub rejected: usize,
    pub residual: f64,
    pub energy: f64,
    pub kappa_final: f64,
    pub epsilon: f64,
}

impl GroundStateSummary {
    pub fn new(gs: &GroundStateResult, epsilon: f64) -> Self {
        GroundStateSummary {
            n_triangles: gs.state.len(),
            converged: gs.converged,
            iterations: gs.iterations,
            rejected: gs.rejected,
            residual: gs.residual,
            energy: gs.energy_history.last().copied().unwrap_or(f64::NAN),
            kappa_final: gs.kappa_final,
            epsilon,
        }
    }
}

pub fn write_mesh(w: &mut ArtifactWriter, mesh: &RingMesh, op: &LaplacianOperator) -> Result<AdmissibilityReport> {
    w.write("mesh/vertices.csv", &output::mesh_vertices_csv(mesh)?)?;
    w.write("mesh/triangles.csv", &output::mesh_triangles_csv(mesh)?)?;
    w.write("mesh/edges.csv", &output::mesh_edges_csv(mesh)?)?;
    w.write("mesh/operator.csv", &output::operator_triplets_csv(op)?)?;
    let report = verify_admissibility(mesh);
    w.write_json("mesh/admissibility.json", &report)?;
    Ok(report)
}

pub fn write_ground_state(
    w: &mut ArtifactWriter,
    mesh: &RingMesh,
    gs: &GroundStateResult,
    config: &RunConfig,
    vtk: bool,
) -> Result<GroundStateSummary> {
    w.write("ground_state/field.csv", &output::field_csv(mesh, &gs.state)?)?;
    if vtk {
        w.write("ground_state/field.vtk", &output::field_vtk(mesh, &gs.state, "ground state")?)?;
    }
    let rows: Vec<Vec<String>> = gs
        .energy_history
        .iter()
        .enumerate()
        .map(|(i, e)| vec![i.to_string(), fmt_f64(*e)])
        .collect();
    w.write("ground_state/energy.csv", &output::table_csv(&["iteration", "energy"], &rows)?)?;
    let summary = GroundStateSummary::new(gs, config.flow.epsilon);
    w.write_json("ground_state/summary.json", &summary)?;
    Ok(summary)
}

/// Wall time in seconds, keyed by stage or detection method.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings(pub BTreeMap<String, f64>);

impl Timings {
    pub fn add(&mut self, key: impl Into<String>, seconds: f64) {
        *self.0.entry(key.into()).or_insert(0.0) += seconds;
    }

    pub fn time<T>(&mut self, key: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.add(key, start.elapsed().as_secs_f64());
        out
    }
}

/// Run every configured detector on `u`, accumulating per-method timings.
pub fn detect_all(
    mesh: &RingMesh,
    u: &Field,
    config: &RunConfig,
    timings: &mut Timings,
) -> Result<Vec<VortexRecord>> {
    let params = config.detection();
    let mut out = Vec::new();
    for &method in &config.detect.methods {
        let records = timings.time(&format!("detect_{method}"), || vortex::detect(mesh, u, method, &params))?;
        out.extend(records);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionSummary {
    pub steps: usize,
    pub snapshots: usize,
    pub final_observables: Observables,
    pub max_mass_drift: f64,
    /// Records per method at the final snapshot.
    pub final_detections: BTreeMap<String, usize>,
    pub final_net_charge: BTreeMap<String, i32>,
}

/// Evolve from `u0`, writing every snapshot, the observables and the vortex
/// list. Returns the final state with a summary.
#[allow(clippy::too_many_arguments)]
pub fn write_evolution(
    w: &mut ArtifactWriter,
    mesh: &RingMesh,
    op: &LaplacianOperator,
    u0: &Field,
    reference: Option<&Field>,
    config: &RunConfig,
    detect: bool,
    timings: &mut Timings,
) -> Result<(Field, EvolutionSummary)> {
    let split = config.split_step();
    let potential = config.potential();
    let mut vortices: Vec<(f64, VortexRecord)> = Vec::new();
    let mut last: Vec<VortexRecord> = Vec::new();
    let mut snapshots = 0;
    let mut detect_timings = Timings::default();
    let start = Instant::now();
    let trajectory = evolve(mesh, op, u0, &potential, &split, reference, |s| {
        snapshots += 1;
        let name = format!("snapshots/step_{:06}", s.step);
        w.write(&format!("{name}.csv"), &output::field_csv(mesh, &s.state)?)?;
        if config.output.vtk {
            w.write(&format!("{name}.vtk"), &output::field_vtk(mesh, &s.state, &format!("t={}", s.t))?)?;
        }
        if detect {
            last = detect_all(mesh, &s.state, config, &mut detect_timings)?;
            vortices.extend(last.iter().map(|r| (s.t, r.clone())));
        }
        Ok(())
    })?;
    let detect_total: f64 = detect_timings.0.values().sum();
    timings.add("evolve", start.elapsed().as_secs_f64() - detect_total);
    for (k, v) in detect_timings.0 {
        timings.add(k, v);
    }
    w.write("observables.csv", &output::observables_csv(&trajectory.observables)?)?;
    if detect {
        w.write("vortices.csv", &output::vortices_csv(&vortices)?)?;
    }
    let m0 = trajectory.observables[0].mass;
    let max_mass_drift = trajectory.observables.iter().map(|o| (o.mass - m0).abs()).fold(0.0, f64::max);
    let mut final_detections = BTreeMap::new();
    let mut final_net_charge = BTreeMap::new();
    if detect {
        for &method in &config.detect.methods {
            let of: Vec<VortexRecord> = last.iter().filter(|r| r.method == method).cloned().collect();
            final_detections.insert(method.to_string(), of.len());
            final_net_charge.insert(method.to_string(), vortex::net_charge(&of));
        }
    }
    let summary = EvolutionSummary {
        steps: trajectory.steps,
        snapshots,
        final_observables: *trajectory.observables.last().expect("at least the initial observation"),
        max_mass_drift,
        final_detections,
        final_net_charge,
    };
    Ok((trajectory.final_state, summary))
}

/// Mode coefficients of each `(t, field)` plus the eigenvalue table.
pub fn write_modes(
    w: &mut ArtifactWriter,
    mesh: &RingMesh,
    fields: &[(f64, &Field)],
    config: &RunConfig,
) -> Result<Vec<(f64, ModeCoefficients)>> {
    let m = &config.modes;
    let refs: Vec<&Field> = fields.iter().map(|(_, f)| *f).collect();
    let (coeffs, eigenvalues) = project_onto_modes(mesh, &refs, m.p_max, m.l_max, m.n_radial, &config.radial())?;
    let rows: Vec<(f64, ModeCoefficients)> = fields.iter().map(|(t, _)| *t).zip(coeffs).collect();
    w.write("modes/coefficients.csv", &output::modes_csv(&rows)?)?;
    w.write(
        "modes/eigenvalues.csv",
        &output::mode_eigenvalues_csv(m.p_max, m.l_max, &eigenvalues)?,
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub n_triangles: usize,
    pub admissibility: AdmissibilityReport,
    pub ground_state: GroundStateSummary,
    pub evolution: EvolutionSummary,
    /// `(Σ|c|² over odd ℓ, Σ|c|² over even ℓ)` at the first and last time.
    pub parity_initial: (f64, f64),
    pub parity_final: (f64, f64),
}

#[derive(Serialize)]
struct ManifestParameters<'a> {
    config: &'a RunConfig,
    ini: String,
    summary: &'a PipelineSummary,
}

/// Mesh → ground state → evolution with detection → mode decomposition,
/// all written below `config.output.dir`. Failures name their stage.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineSummary> {
    config.validate()?;
    let mut timings = Timings::default();
    let mut w = ArtifactWriter::new(&config.output.dir).map_err(|e| e.in_stage("output"))?;
    w.write("config.ini", config.to_ini().as_bytes()).map_err(|e| e.in_stage("output"))?;

    let (mesh, op) = timings.time("mesh", || build_mesh(config)).map_err(|e| e.in_stage("mesh"))?;
    let admissibility = write_mesh(&mut w, &mesh, &op).map_err(|e| e.in_stage("mesh"))?;

    let gs = timings
        .time("ground_state", || ground_state_stage(config, &mesh, &op))
        .and_then(|gs| {
            if gs.converged {
                Ok(gs)
            } else {
                Err(Error::NotConverged {
                    iterations: gs.iterations + gs.rejected,
                    residual: gs.residual,
                    tolerance: config.flow.epsilon,
                })
            }
        })
        .map_err(|e| e.in_stage("ground_state"))?;
    let gs_summary =
        write_ground_state(&mut w, &mesh, &gs, config, config.output.vtk).map_err(|e| e.in_stage("ground_state"))?;

    let u0 = initial_state(config, &mesh, &gs.state).map_err(|e| e.in_stage("initial_state"))?;
    let (final_state, evolution) =
        write_evolution(&mut w, &mesh, &op, &u0, Some(&gs.state), config, true, &mut timings)
            .map_err(|e| e.in_stage("evolve"))?;

    let t_final = config.split.t_max;
    let modes = timings
        .time("modes", || write_modes(&mut w, &mesh, &[(0.0, &u0), (t_final, &final_state)], config))
        .map_err(|e| e.in_stage("modes"))?;

    let summary = PipelineSummary {
        n_triangles: mesh.n_triangles(),
        admissibility,
        ground_state: gs_summary,
        evolution,
        parity_initial: modes[0].1.parity_weights(),
        parity_final: modes[1].1.parity_weights(),
    };
    w.write_json("summary.json", &summary).map_err(|e| e.in_stage("output"))?;
    w.write_json("timings.json", &timings).map_err(|e| e.in_stage("output"))?;
    w.finish(&ManifestParameters {
        config,
        ini: config.to_ini(),
        summary: &summary,
    })
    .map_err(|e| e.in_stage("output"))?;
    Ok(summary)
}

/// Records of one method only.
pub fn of_method(records: &[VortexRecord], method: DetectionMethod) -> Vec<VortexRecord> {
    records.iter().filter(|r| r.method == method).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|h: &f64| 3.0 * h.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn coarse_space_convergence_is_first_order() {
        let mut c = RunConfig::default();
        c.harness.space_h = vec![0.2, 0.1, 0.05];
        c.harness.space_betas = vec![1];
        let s = run_space_convergence(&c).unwrap();
        assert_eq!(s.rows.len(), 3);
        let slope = s.slopes[0].1;
        assert!((0.5..1.5).contains(&slope), "{slope}");
    }
}
