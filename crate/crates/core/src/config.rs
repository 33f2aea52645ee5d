//! Run configuration in a flat INI dialect:
//!
//! ```text
//! # comment
//! [mesh]
//! r_min = 0.6
//! r_max = 1.4
//! h = 0.06
//! ```
//!
//! Keys outside the known set are rejected with their line number, and a
//! serialized config parses back to an identical value.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::SplitStepConfig;
use crate::error::{Error, Result};
use crate::fv::BoundaryCondition;
use crate::ground_state::GradientFlowConfig;
use crate::mesh::MeshParams;
use crate::potentials::PotentialParams;
use crate::spectral::RadialParams;
use crate::vortex::{DetectionMethod, DetectionParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    GroundState,
    /// Ground state with a sign jump across `x₁ = 0`.
    Unstable,
}

impl FromStr for InitialState {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ground_state" => Ok(InitialState::GroundState),
            "unstable" => Ok(InitialState::Unstable),
            other => Err(format!("unknown initial state `{other}` (ground_state | unstable)")),
        }
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitialState::GroundState => "ground_state",
            InitialState::Unstable => "unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsSection {
    pub m: f64,
    pub v0: f64,
    pub gamma: f64,
    pub v_p: f64,
    pub n_theta: u32,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSection {
    pub kappa0: f64,
    pub epsilon: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSection {
    pub t_max: f64,
    /// Number of steps `J`; `τ = T_max / J`.
    pub steps: usize,
    pub snapshot_stride: usize,
    pub fuse_b_steps: bool,
    pub initial: InitialState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectSection {
    pub tol1: f64,
    pub tol2: f64,
    pub lambda_max: usize,
    pub delta: f64,
    pub vort_threshold: f64,
    pub methods: Vec<DetectionMethod>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModesSection {
    pub p_max: usize,
    pub l_max: usize,
    /// Radial grid intervals.
    pub n_radial: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub vtk: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessSection {
    pub space_h: Vec<f64>,
    pub space_betas: Vec<u32>,
    pub time_t_max: f64,
    pub time_k: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mesh: MeshParams,
    pub bc: BoundaryCondition,
    pub physics: PhysicsSection,
    pub flow: FlowSection,
    pub split: SplitSection,
    pub detect: DetectSection,
    pub modes: ModesSection,
    pub output: OutputSection,
    pub harness: HarnessSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Paper62,
    UnstableDirichlet,
    UnstableNeumann,
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper62" => Ok(Preset::Paper62),
            "unstable-dirichlet" => Ok(Preset::UnstableDirichlet),
            "unstable-neumann" => Ok(Preset::UnstableNeumann),
            other => Err(format!(
                "unknown preset `{other}` (paper62 | unstable-dirichlet | unstable-neumann)"
            )),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Paper62 => "paper62",
            Preset::UnstableDirichlet => "unstable-dirichlet",
            Preset::UnstableNeumann => "unstable-neumann",
        })
    }
}

impl Preset {
    pub fn config(self) -> RunConfig {
        let mut c = RunConfig::default();
        match self {
            Preset::Paper62 => {}
            Preset::UnstableDirichlet => {
                c.physics.v_p = 0.0;
                c.split.initial = InitialState::Unstable;
            }
            Preset::UnstableNeumann => {
                c.bc = BoundaryCondition::Neumann;
                c.physics.v0 = 0.0;
                c.physics.v_p = 0.0;
                c.split.initial = InitialState::Unstable;
            }
        }
        c
    }
}

impl Default for RunConfig {
    /// The vortex-nucleation experiment at full resolution.
    fn default() -> Self {
        RunConfig {
            mesh: MeshParams {
                n_circles: Some(41),
                n_points: Some(486),
                match_paper_counts: true,
                ..MeshParams::new(0.6, 1.4, 0.03)
            },
            bc: BoundaryCondition::Dirichlet,
            physics: PhysicsSection {
                m: 10.0,
                v0: 100.0,
                gamma: 100.0,
                v_p: 0.05,
                n_theta: 6,
                omega: 10.0 * std::f64::consts::PI / 3.0,
            },
            flow: FlowSection {
                kappa0: 1e-2,
                epsilon: 5e-3,
                max_iters: 20_000,
            },
            split: SplitSection {
                t_max: 3.0,
                steps: 5000,
                snapshot_stride: 500,
                fuse_b_steps: true,
                initial: InitialState::GroundState,
            },
            detect: DetectSection {
                tol1: 0.1,
                tol2: 0.05,
                lambda_max: 10,
                delta: 0.1,
                vort_threshold: 50.0,
                methods: vec![
                    DetectionMethod::Density,
                    DetectionMethod::RegVorticity,
                    DetectionMethod::PseudoVorticity,
                ],
            },
            modes: ModesSection {
                p_max: 3,
                l_max: 80,
                n_radial: 500,
            },
            output: OutputSection {
                dir: PathBuf::from("out"),
                vtk: true,
            },
            harness: HarnessSection {
                space_h: vec![0.1, 0.05, 0.025],
                space_betas: vec![1, 2, 3],
                time_t_max: 0.1,
                time_k: vec![5, 6, 7, 8, 9, 10],
            },
        }
    }
}

impl RunConfig {
    pub fn potential(&self) -> PotentialParams {
        PotentialParams {
            v0: self.physics.v0,
            m: self.physics.m,
            v_p: self.physics.v_p,
            n_theta: self.physics.n_theta,
            omega: self.physics.omega,
        }
    }

    /// The time-independent trap only.
    pub fn trap(&self) -> PotentialParams {
        PotentialParams {
            v_p: 0.0,
            ..self.potential()
        }
    }

    pub fn gradient_flow(&self) -> GradientFlowConfig {
        GradientFlowConfig {
            kappa0: self.flow.kappa0,
            epsilon: self.flow.epsilon,
            max_iters: self.flow.max_iters,
            gamma: self.physics.gamma,
        }
    }

    pub fn split_step(&self) -> SplitStepConfig {
        SplitStepConfig {
            tau: self.split.t_max / self.split.steps as f64,
            t_max: self.split.t_max,
            m: self.physics.m,
            gamma: self.physics.gamma,
            snapshot_stride: self.split.snapshot_stride,
            fuse_b_steps: self.split.fuse_b_steps,
        }
    }

    pub fn detection(&self) -> DetectionParams {
        DetectionParams {
            tol1: self.detect.tol1,
            tol2: self.detect.tol2,
            lambda_max: self.detect.lambda_max,
            delta: self.detect.delta,
            vort_threshold: self.detect.vort_threshold,
            bc: self.bc,
        }
    }

    pub fn radial(&self) -> RadialParams {
        RadialParams {
            r_min: self.mesh.r_min,
            r_max: self.mesh.r_max,
            m: self.physics.m,
            v0: self.physics.v0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        self.potential().validate()?;
        self.gradient_flow().validate()?;
        if self.split.steps == 0 {
            return Err(Error::param("steps", "must be >= 1"));
        }
        self.split_step().validate()?;
        self.detection().validate()?;
        if self.detect.methods.is_empty() {
            return Err(Error::param("methods", "at least one detection method is required"));
        }
        if self.modes.n_radial < 2 * (self.modes.p_max + 1) {
            return Err(Error::param("n_radial", "too few radial intervals for the requested modes"));
        }
        if self.harness.space_h.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::param("space_h", "resolutions must be positive"));
        }
        if self.harness.space_betas.contains(&0) {
            return Err(Error::param("space_betas", "indices start at 1"));
        }
        if !(self.harness.time_t_max > 0.0) {
            return Err(Error::param("time_t_max", "must be positive"));
        }
        if self.harness.time_k.iter().any(|&k| k == 0 || k > 24) {
            return Err(Error::param("time_k", "exponents must lie in 1..=24"));
        }
        Ok(())
    }

    /// Serialize in the same dialect [`parse_config`] reads.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let m = &self.mesh;
        let _ = writeln!(s, "[mesh]");
        let _ = writeln!(s, "r_min = {}", m.r_min);
        let _ = writeln!(s, "r_max = {}", m.r_max);
        let _ = writeln!(s, "h = {}", m.h);
        if let Some(nc) = m.n_circles {
            let _ = writeln!(s, "n_circles = {nc}");
        }
        if let Some(np) = m.n_points {
            let _ = writeln!(s, "n_points = {np}");
        }
        let _ = writeln!(s, "match_paper_counts = {}", m.match_paper_counts);
        let _ = writeln!(s, "bc = {}", self.bc);

        let p = &self.physics;
        let _ = writeln!(s, "\n[physics]");
        let _ = writeln!(s, "m = {}", p.m);
        let _ = writeln!(s, "v0 = {}", p.v0);
        let _ = writeln!(s, "gamma = {}", p.gamma);
        let _ = writeln!(s, "v_p = {}", p.v_p);
        let _ = writeln!(s, "n_theta = {}", p.n_theta);
        let _ = writeln!(s, "omega = {}", p.omega);

        let f = &self.flow;
        let _ = writeln!(s, "\n[flow]");
        let _ = writeln!(s, "kappa0 = {}", f.kappa0);
        let _ = writeln!(s, "epsilon = {}", f.epsilon);
        let _ = writeln!(s, "max_iters = {}", f.max_iters);

        let sp = &self.split;
        let _ = writeln!(s, "\n[split]");
        let _ = writeln!(s, "t_max = {}", sp.t_max);
        let _ = writeln!(s, "steps = {}", sp.steps);
        let _ = writeln!(s, "snapshot_stride = {}", sp.snapshot_stride);
        let _ = writeln!(s, "fuse_b_steps = {}", sp.fuse_b_steps);
        let _ = writeln!(s, "initial = {}", sp.initial);

        let d = &self.detect;
        let _ = writeln!(s, "\n[detect]");
        let _ = writeln!(s, "tol1 = {}", d.tol1);
        let _ = writeln!(s, "tol2 = {}", d.tol2);
        let _ = writeln!(s, "lambda_max = {}", d.lambda_max);
        let _ = writeln!(s, "delta = {}", d.delta);
        let _ = writeln!(s, "vort_threshold = {}", d.vort_threshold);
        let _ = writeln!(s, "methods = {}", join(&d.methods));

        let md = &self.modes;
        let _ = writeln!(s, "\n[modes]");
        let _ = writeln!(s, "p_max = {}", md.p_max);
        let _ = writeln!(s, "l_max = {}", md.l_max);
        let _ = writeln!(s, "n_radial = {}", md.n_radial);

        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", self.output.dir.display());
        let _ = writeln!(s, "vtk = {}", self.output.vtk);

        let hs = &self.harness;
        let _ = writeln!(s, "\n[harness]");
        let _ = writeln!(s, "space_h = {}", join(&hs.space_h));
        let _ = writeln!(s, "space_betas = {}", join(&hs.space_betas));
        let _ = writeln!(s, "time_t_max = {}", hs.time_t_max);
        let _ = writeln!(s, "time_k = {}", join(&hs.time_k));
        s
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

const KEYS: &[(&str, &[&str])] = &[
    ("mesh", &["r_min", "r_max", "h", "n_circles", "n_points", "match_paper_counts", "bc"]),
    ("physics", &["m", "v0", "gamma", "v_p", "n_theta", "omega"]),
    ("flow", &["kappa0", "epsilon", "max_iters"]),
    ("split", &["t_max", "steps", "snapshot_stride", "fuse_b_steps", "initial"]),
    ("detect", &["tol1", "tol2", "lambda_max", "delta", "vort_threshold", "methods"]),
    ("modes", &["p_max", "l_max", "n_radial"]),
    ("output", &["dir", "vtk"]),
    ("harness", &["space_h", "space_betas", "time_t_max", "time_k"]),
];

const REQUIRED: &[(&str, &str)] = &[("mesh", "r_min"), ("mesh", "r_max"), ("mesh", "h")];

/// Parse a complete config. `[mesh] r_min, r_max, h` are required and the
/// mesh counts follow from them unless given explicitly; every other key
/// defaults to the nucleation experiment.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let entries = tokenize(text)?;
    for (section, key) in REQUIRED {
        if !entries.contains_key(&(section.to_string(), key.to_string())) {
            return Err(Error::Config {
                line: 0,
                message: format!("missing required key `{key}` in [{section}]"),
            });
        }
    }
    let mut base = RunConfig::default();
    base.mesh.n_circles = None;
    base.mesh.n_points = None;
    base.mesh.match_paper_counts = false;
    apply(base, &entries)
}

/// Parse `text` as overrides on top of `base`; nothing is required.
pub fn parse_config_over(text: &str, base: RunConfig) -> Result<RunConfig> {
    let entries = tokenize(text)?;
    apply(base, &entries)
}

type Entries = BTreeMap<(String, String), (usize, String)>;

fn tokenize(text: &str) -> Result<Entries> {
    let mut entries = Entries::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Config {
                line,
                message: format!("malformed section header `{content}`"),
            })?;
            let name = name.trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(Error::Config {
                    line,
                    message: format!("unknown section [{name}]"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.as_deref().ok_or_else(|| Error::Config {
            line,
            message: format!("key `{key}` appears before any section header"),
        })?;
        let known = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !known.contains(&key) {
            return Err(Error::Config {
                line,
                message: format!("unknown key `{key}` in [{sec}]"),
            });
        }
        if let Some((first, _)) = entries.insert((sec.to_string(), key.to_string()), (line, value.to_string())) {
            return Err(Error::Config {
                line,
                message: format!("duplicate key `{key}` in [{sec}] (first set on line {first})"),
            });
        }
    }
    Ok(entries)
}

fn value<T: FromStr>(line: usize, key: &str, text: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    text.parse().map_err(|e: T::Err| Error::Config {
        line,
        message: format!("bad value `{text}` for `{key}`: {e}"),
    })
}

fn list<T: FromStr>(line: usize, key: &str, text: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| value(line, key, s))
        .collect()
}

impl FromStr for DetectionMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "density" => Ok(DetectionMethod::Density),
            "reg_vorticity" => Ok(DetectionMethod::RegVorticity),
            "pseudo_vorticity" => Ok(DetectionMethod::PseudoVorticity),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

fn apply(mut c: RunConfig, entries: &Entries) -> Result<RunConfig> {
    for ((section, key), (line, text)) in entries {
        let (line, k, t) = (*line, key.as_str(), text.as_str());
        match (section.as_str(), k) {
            ("mesh", "r_min") => c.mesh.r_min = value(line, k, t)?,
            ("mesh", "r_max") => c.mesh.r_max = value(line, k, t)?,
            ("mesh", "h") => c.mesh.h = value(line, k, t)?,
            ("mesh", "n_circles") => c.mesh.n_circles = optional(line, k, t)?,
            ("mesh", "n_points") => c.mesh.n_points = optional(line, k, t)?,
            ("mesh", "match_paper_counts") => c.mesh.match_paper_counts = value(line, k, t)?,
            ("mesh", "bc") => c.bc = value(line, k, t)?,
            ("physics", "m") => c.physics.m = value(line, k, t)?,
            ("physics", "v0") => c.physics.v0 = value(line, k, t)?,
            ("physics", "gamma") => c.physics.gamma = value(line, k, t)?,
            ("physics", "v_p") => c.physics.v_p = value(line, k, t)?,
            ("physics", "n_theta") => c.physics.n_theta = value(line, k, t)?,
            ("physics", "omega") => c.physics.omega = value(line, k, t)?,
            ("flow", "kappa0") => c.flow.kappa0 = value(line, k, t)?,
            ("flow", "epsilon") => c.flow.epsilon = value(line, k, t)?,
            ("flow", "max_iters") => c.flow.max_iters = value(line, k, t)?,
            ("split", "t_max") => c.split.t_max = value(line, k, t)?,
            ("split", "steps") => c.split.steps = value(line, k, t)?,
            ("split", "snapshot_stride") => c.split.snapshot_stride = value(line, k, t)?,
            ("split", "fuse_b_steps") => c.split.fuse_b_steps = value(line, k, t)?,
            ("split", "initial") => c.split.initial = value(line, k, t)?,
            ("detect", "tol1") => c.detect.tol1 = value(line, k, t)?,
            ("detect", "tol2") => c.detect.tol2 = value(line, k, t)?,
            ("detect", "lambda_max") => c.detect.lambda_max = value(line, k, t)?,
            ("detect", "delta") => c.detect.delta = value(line, k, t)?,
            ("detect", "vort_threshold") => c.detect.vort_threshold = value(line, k, t)?,
            ("detect", "methods") => c.detect.methods = list(line, k, t)?,
            ("modes", "p_max") => c.modes.p_max = value(line, k, t)?,
            ("modes", "l_max") => c.modes.l_max = value(line, k, t)?,
            ("modes", "n_radial") => c.modes.n_radial = value(line, k, t)?,
            ("output", "dir") => c.output.dir = PathBuf::from(t),
            ("output", "vtk") => c.output.vtk = value(line, k, t)?,
            ("harness", "space_h") => c.harness.space_h = list(line, k, t)?,
            ("harness", "space_betas") => c.harness.space_betas = list(line, k, t)?,
            ("harness", "time_t_max") => c.harness.time_t_max = value(line, k, t)?,
            ("harness", "time_k") => c.harness.time_k = list(line, k, t)?,
            _ => unreachable!("tokenize only admits known keys"),
        }
    }
    // Report range violations at the offending line when the key was given.
    c.validate().map_err(|e| match e {
        Error::InvalidParameter { name, reason } => {
            let line = entries
                .iter()
                .find(|((_, key), _)| key == name)
                .map(|(_, (line, _))| *line)
                .unwrap_or(0);
            Error::Config {
                line,
                message: format!("`{name}` {reason}"),
            }
        }
        other => other,
    })?;
    Ok(c)
}

/// `none` or an empty value clears an override.
fn optional(line: usize, key: &str, text: &str) -> Result<Option<usize>> {
    if text.is_empty() || text == "none" {
        Ok(None)
    } else {
        value(line, key, text).map(Some)
    }
}
