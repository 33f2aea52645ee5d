use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ringgp::config::{parse_config, parse_config_over, Preset, RunConfig};
use ringgp::harness::{self, Timings};
use ringgp::output::{self, fmt_f64, ArtifactWriter};
use ringgp::vortex;
use ringgp::Error;

#[derive(Parser)]
#[command(name = "ringgp", version, about = "Gross-Pitaevskii dynamics on a ring-shaped trap")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// INI config file. Overrides the preset when both are given.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Named configuration: paper62, unstable-dirichlet or unstable-neumann.
    #[arg(long, global = true, value_parser = parse_preset)]
    preset: Option<Preset>,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Build the triangulation and write its geometry and operator.
    Mesh,
    /// Compute the ground state by normalized gradient flow.
    GroundState,
    /// Evolve from the configured initial state, writing snapshots.
    Evolve {
        /// Also run the vortex detectors on every snapshot.
        #[arg(long)]
        detect: bool,
    },
    /// Detect vortices in a field file, or in the final state of a run.
    Vortices {
        /// Field CSV (`id,x,y,re,im`) on the configured mesh.
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Decompose a field file, or the ground state, on the radial modes.
    Modes {
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Eigenfunction residuals over the configured resolutions.
    ConvSpace,
    /// Time-order estimates over the configured step counts.
    ConvTime,
    /// Mesh, ground state, evolution, detection and modes in one run.
    Pipeline,
}

fn load_config(g: &Global) -> ringgp::Result<RunConfig> {
    let mut config = match (&g.config, g.preset) {
        (Some(path), preset) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
                line: 0,
                message: format!("cannot read {}: {e}", path.display()),
            })?;
            match preset {
                Some(p) => parse_config_over(&text, p.config())?,
                None => parse_config(&text)?,
            }
        }
        (None, Some(p)) => p.config(),
        (None, None) => RunConfig::default(),
    };
    if let Some(out) = &g.out {
        config.output.dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = load_config(&cli.global).and_then(|config| run(&cli.command, &config));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn run(command: &Command, config: &RunConfig) -> ringgp::Result<()> {
    if let Command::Pipeline = command {
        let s = harness::run_pipeline(config)?;
        println!(
            "N={} ground state residual {:.3e}; final detections {:?}, net charge {:?}",
            s.n_triangles, s.ground_state.residual, s.evolution.final_detections, s.evolution.final_net_charge
        );
        return Ok(());
    }
    let mut w = ArtifactWriter::new(&config.output.dir)?;
    w.write("config.ini", config.to_ini().as_bytes())?;
    let mut timings = Timings::default();
    match command {
        Command::Mesh => {
            let (mesh, op) = timings.time("mesh", || harness::build_mesh(config))?;
            let report = harness::write_mesh(&mut w, &mesh, &op)?;
            let (nc, np) = config.mesh.resolved_counts()?;
            println!(
                "circles {nc}, points per circle {np}, triangles {}, max angle {:.6} rad, orthogonality defect {:.3e}",
                mesh.n_triangles(),
                report.max_angle,
                report.max_orthogonality_defect
            );
        }
        Command::GroundState => {
            let (mesh, op) = timings.time("mesh", || harness::build_mesh(config))?;
            let gs = timings.time("ground_state", || harness::ground_state_stage(config, &mesh, &op))?;
            let s = harness::write_ground_state(&mut w, &mesh, &gs, config, config.output.vtk)?;
            println!(
                "converged {} after {} steps ({} rejected), residual {:.3e}, energy {}",
                s.converged, s.iterations, s.rejected, s.residual, s.energy
            );
        }
        Command::Evolve { detect } => {
            let (mesh, op) = timings.time("mesh", || harness::build_mesh(config))?;
            let gs = timings.time("ground_state", || harness::ground_state_stage(config, &mesh, &op))?;
            let u0 = harness::initial_state(config, &mesh, &gs.state)?;
            let (_, s) =
                harness::write_evolution(&mut w, &mesh, &op, &u0, Some(&gs.state), config, *detect, &mut timings)?;
            let o = s.final_observables;
            println!(
                "{} steps, {} snapshots, final mass {}, max mass drift {:.3e}, err_gs {}",
                s.steps,
                s.snapshots,
                o.mass,
                s.max_mass_drift,
                o.err_gs.map(fmt_f64).unwrap_or_default()
            );
            if *detect {
                println!("final detections {:?}", s.final_detections);
            }
        }
        Command::Vortices { field } => {
            let (mesh, op) = timings.time("mesh", || harness::build_mesh(config))?;
            let (t, u) = match field {
                Some(path) => (0.0, read_field(&mesh, path)?),
                None => {
                    let gs = timings.time("ground_state", || harness::ground_state_stage(config, &mesh, &op))?;
                    let u0 = harness::initial_state(config, &mesh, &gs.state)?;
                    let split = config.split_step();
                    let start = Instant::now();
                    let traj = ringgp::dynamics::evolve(
                        &mesh,
                        &op,
                        &u0,
                        &config.potential(),
                        &split,
                        None,
                        |_| Ok(()),
                    )?;
                    timings.add("evolve", start.elapsed().as_secs_f64());
                    (config.split.t_max, traj.final_state)
                }
            };
            let records = harness::detect_all(&mesh, &u, config, &mut timings)?;
            let rows: Vec<_> = records.iter().map(|r| (t, r.clone())).collect();
            w.write("vortices.csv", &output::vortices_csv(&rows)?)?;
            let params = config.detection();
            let reg = vortex::regularized_vorticity(&mesh, &u, params.delta, params.bc)?;
            w.write("reg_vorticity.csv", &output::real_field_csv(&mesh, &reg, "reg_vorticity")?)?;
            let ps = vortex::pseudo_vorticity(&mesh, &u, params.bc)?;
            w.write("pseudo_vorticity.csv", &output::real_field_csv(&mesh, &ps, "pseudo_vorticity")?)?;
            for &method in &config.detect.methods {
                let of: Vec<_> = harness::of_method(&records, method);
                let plus = of.iter().filter(|r| r.index > 0).count();
                let minus = of.iter().filter(|r| r.index < 0).count();
                println!("{method}: {} records ({plus} positive, {minus} negative)", of.len());
            }
        }
        Command::Modes { field } => {
            let (mesh, op) = timings.time("mesh", || harness::build_mesh(config))?;
            let u = match field {
                Some(path) => read_field(&mesh, path)?,
                None => timings.time("ground_state", || harness::ground_state_stage(config, &mesh, &op))?.state,
            };
            let rows = timings.time("modes", || harness::write_modes(&mut w, &mesh, &[(0.0, &u)], config))?;
            let (odd, even) = rows[0].1.parity_weights();
            println!("captured weight {:.6}, odd {odd:.3e}, even {even:.6}", odd + even);
        }
        Command::ConvSpace => {
            let s = timings.time("conv_space", || harness::run_space_convergence(config))?;
            let rows: Vec<Vec<String>> = s
                .rows
                .iter()
                .map(|r| {
                    vec![
                        fmt_f64(r.h),
                        r.n_triangles.to_string(),
                        r.beta.to_string(),
                        fmt_f64(r.lambda),
                        fmt_f64(r.residual),
                    ]
                })
                .collect();
            w.write(
                "space_convergence.csv",
                &output::table_csv(&["h", "n_triangles", "beta", "lambda", "residual"], &rows)?,
            )?;
            let slopes: Vec<Vec<String>> =
                s.slopes.iter().map(|(b, sl)| vec![b.to_string(), fmt_f64(*sl)]).collect();
            w.write("space_slopes.csv", &output::table_csv(&["beta", "slope"], &slopes)?)?;
            for r in &s.rows {
                println!("h={} N={} beta={} residual={:.4e}", r.h, r.n_triangles, r.beta, r.residual);
            }
            for (b, sl) in &s.slopes {
                println!("beta={b} slope={sl:.3}");
            }
        }
        Command::ConvTime => {
            let rows = timings.time("conv_time", || harness::run_time_convergence(config))?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![r.k.to_string(), r.steps.to_string(), fmt_f64(r.m_phi)])
                .collect();
            w.write("time_convergence.csv", &output::table_csv(&["k", "steps", "m_phi"], &table)?)?;
            for r in &rows {
                println!("k={} J={} m_phi={:.4}", r.k, r.steps, r.m_phi);
            }
        }
        Command::Pipeline => unreachable!("handled above"),
    }
    w.write_json("timings.json", &timings)?;
    w.finish(config)?;
    Ok(())
}

fn read_field(mesh: &ringgp::RingMesh, path: &Path) -> ringgp::Result<ringgp::Field> {
    let bytes = std::fs::read(path).map_err(|e| Error::Config {
        line: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    output::read_field_csv(mesh, &bytes)
}
