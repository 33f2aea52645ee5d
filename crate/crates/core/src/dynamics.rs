//! Strang splitting for
//! `i ∂ψ = -(1/2m) Δψ + V(t) ψ + γ |ψ|² ψ`:
//! an exact pointwise phase flow for the potential and nonlinear part, and a
//! Cayley (Padé (1,1)) flow for the kinetic part.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, Field};
use crate::fv::LaplacianOperator;
use crate::ground_state::{energy_raw, Physics};
use crate::linalg::ShiftedSystem;
use crate::mesh::RingMesh;
use crate::potentials::{PolarSamples, PotentialParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitStepConfig {
    pub tau: f64,
    pub t_max: f64,
    pub m: f64,
    pub gamma: f64,
    /// Emit a snapshot every this many steps (0: only the first and last).
    pub snapshot_stride: usize,
    pub fuse_b_steps: bool,
}

impl SplitStepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::param("tau", format!("must be positive, got {}", self.tau)));
        }
        if !(self.t_max >= self.tau) || !self.t_max.is_finite() {
            return Err(Error::param("t_max", format!("must be >= tau, got {}", self.t_max)));
        }
        if !(self.m > 0.0) {
            return Err(Error::param("m", format!("must be positive, got {}", self.m)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::param("gamma", format!("must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }

    /// Number of steps `J`, with `τ = T_max / J` up to rounding.
    pub fn n_steps(&self) -> usize {
        ((self.t_max / self.tau).round() as usize).max(1)
    }

    pub fn physics(&self) -> Physics {
        Physics {
            m: self.m,
            gamma: self.gamma,
        }
    }
}

/// `w ↦ exp(-i (Φ + dt γ |w|²)) w` with `Φ = ∫ V` precomputed per triangle.
pub fn apply_phase(u: &mut [Complex64], integral: &[f64], dt: f64, gamma: f64) {
    u.par_iter_mut().zip(integral.par_iter()).for_each(|(z, &phi)| {
        let phase = phi + dt * gamma * z.norm_sqr();
        *z *= Complex64::from_polar(1.0, -phase);
    });
}

/// `Φ_B^{dt,t}` on a field.
pub fn flow_potential(
    mesh: &RingMesh,
    u: &Field,
    t: f64,
    dt: f64,
    potential: &PotentialParams,
    gamma: f64,
) -> Result<Field> {
    u.check_mesh(mesh)?;
    let integral = crate::potentials::phase_integral(mesh, t, dt, potential)?;
    let mut out = u.values.clone();
    apply_phase(&mut out, &integral.values, dt, gamma);
    Ok(u.with_values(out))
}

/// `Φ_A^τ ≈ (I - i z A_T)^{-1} (I + i z A_T)`, `z = τ / (4m)`, factored once.
///
/// Multiplying by the cell areas gives `(M - i z A) X = M U + i z A U`, whose
/// Hermitian part `M` is positive definite.
pub struct KineticFlow<'a> {
    op: &'a LaplacianOperator,
    system: ShiftedSystem<'a, Complex64>,
    z: f64,
}

impl<'a> KineticFlow<'a> {
    pub fn new(op: &'a LaplacianOperator, tau: f64, m: f64) -> Result<Self> {
        if !(tau > 0.0) || !(m > 0.0) {
            return Err(Error::param("tau", "tau and m must be positive"));
        }
        let z = tau / (4.0 * m);
        let diag: Vec<Complex64> = op.areas().iter().map(|&a| Complex64::new(a, 0.0)).collect();
        let system = ShiftedSystem::new(op.pattern(), &op.a, diag, Complex64::new(0.0, -z))?;
        Ok(KineticFlow { op, system, z })
    }

    pub fn apply_raw(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        let au = self.op.apply_flux_raw(u);
        let iz = Complex64::new(0.0, self.z);
        let rhs: Vec<Complex64> = u
            .iter()
            .zip(&au)
            .zip(self.op.areas())
            .map(|((x, ax), a)| x * *a + iz * ax)
            .collect();
        Ok(self.system.solve(&rhs)?.0)
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        self.op.check(u)?;
        Ok(u.with_values(self.apply_raw(&u.values)?))
    }
}

pub fn flow_kinetic(u: &Field, tau: f64, m: f64, op: &LaplacianOperator) -> Result<Field> {
    KineticFlow::new(op, tau, m)?.apply(u)
}

/// Precomputed stepping machinery for one run.
pub struct Stepper<'a> {
    kinetic: KineticFlow<'a>,
    samples: PolarSamples,
    potential: PotentialParams,
    config: SplitStepConfig,
    /// `∫ V` over a half and a full step when `V` is time independent.
    static_half: Option<Vec<f64>>,
    static_full: Option<Vec<f64>>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        mesh: &RingMesh,
        op: &'a LaplacianOperator,
        potential: &PotentialParams,
        config: &SplitStepConfig,
    ) -> Result<Self> {
        config.validate()?;
        potential.validate()?;
        if op.mesh_id() != mesh.id() {
            return Err(Error::MeshMismatch {
                left: op.dim(),
                right: mesh.n_triangles(),
            });
        }
        let kinetic = KineticFlow::new(op, config.tau, config.m)?;
        let samples = PolarSamples::new(mesh);
        let time_independent = potential.v_p == 0.0 || potential.omega == 0.0;
        let (static_half, static_full) = if time_independent {
            (
                Some(samples.integral(potential, 0.0, 0.5 * config.tau)),
                Some(samples.integral(potential, 0.0, config.tau)),
            )
        } else {
            (None, None)
        };
        Ok(Stepper {
            kinetic,
            samples,
            potential: *potential,
            config: *config,
            static_half,
            static_full,
        })
    }

    pub fn config(&self) -> &SplitStepConfig {
        &self.config
    }

    fn phase(&self, u: &mut [Complex64], t: f64, dt: f64) {
        let cached = if dt == self.config.tau {
            self.static_full.as_deref()
        } else if dt == 0.5 * self.config.tau {
            self.static_half.as_deref()
        } else {
            None
        };
        match cached {
            Some(phi) => apply_phase(u, phi, dt, self.config.gamma),
            None => {
                let phi = self.samples.integral(&self.potential, t, dt);
                apply_phase(u, &phi, dt, self.config.gamma);
            }
        }
    }

    /// `Φ_B^{τ/2, t+τ/2} ∘ Φ_A^τ ∘ Φ_B^{τ/2, t}`.
    pub fn strang_step(&self, u: &mut Vec<Complex64>, t: f64) -> Result<()> {
        let half = 0.5 * self.config.tau;
        self.phase(u, t, half);
        *u = self.kinetic.apply_raw(u)?;
        self.phase(u, t + half, half);
        Ok(())
    }

    /// Advance `steps` steps from time `t0`. With fused B flows the inner
    /// half steps are merged into full steps, which is exact because the
    /// phase flow preserves `|w|`.
    pub fn advance(&self, u: &mut Vec<Complex64>, t0: f64, steps: usize, step0: usize) -> Result<()> {
        if steps == 0 {
            return Ok(());
        }
        let tau = self.config.tau;
        let half = 0.5 * tau;
        if !self.config.fuse_b_steps {
            for j in 0..steps {
                self.strang_step(u, t0 + j as f64 * tau)
                    .map_err(|e| nan_as_step(e, step0 + j + 1))?;
                check_finite(u, step0 + j + 1)?;
            }
            return Ok(());
        }
        self.phase(u, t0, half);
        for j in 0..steps {
            let t = t0 + j as f64 * tau;
            *u = self.kinetic.apply_raw(u).map_err(|e| nan_as_step(e, step0 + j + 1))?;
            if j + 1 < steps {
                self.phase(u, t + half, tau);
            } else {
                self.phase(u, t + half, half);
            }
            check_finite(u, step0 + j + 1)?;
        }
        Ok(())
    }
}

fn nan_as_step(e: Error, step: usize) -> Error {
    match e {
        Error::SolverFailure { residual, .. } if !residual.is_finite() => Error::NonFinite { step },
        other => other,
    }
}

fn check_finite(u: &[Complex64], step: usize) -> Result<()> {
    if u.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

/// One strang step on a field, factoring the kinetic system on the fly.
pub fn strang_step(
    mesh: &RingMesh,
    op: &LaplacianOperator,
    u: &Field,
    t: f64,
    potential: &PotentialParams,
    config: &SplitStepConfig,
) -> Result<Field> {
    u.check_mesh(mesh)?;
    let stepper = Stepper::new(mesh, op, potential, config)?;
    let mut values = u.values.clone();
    stepper.strang_step(&mut values, t)?;
    Ok(u.with_values(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub t: f64,
    pub mass: f64,
    /// Energy with the potential frozen at `t`.
    pub energy: f64,
    /// `‖|U(t)| - |U_ref|‖`, when a reference modulus is supplied.
    pub err_gs: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub state: Field,
    pub observables: Observables,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_state: Field,
    pub steps: usize,
    pub observables: Vec<Observables>,
}

/// Run from `t = 0` to `T_max`, calling `observer` at step 0, every
/// `snapshot_stride` steps, and at the final step.
pub fn evolve(
    mesh: &RingMesh,
    op: &LaplacianOperator,
    u0: &Field,
    potential: &PotentialParams,
    config: &SplitStepConfig,
    reference: Option<&Field>,
    mut observer: impl FnMut(&Snapshot) -> Result<()>,
) -> Result<Trajectory> {
    u0.check_mesh(mesh)?;
    if let Some(r) = reference {
        r.check_mesh(mesh)?;
    }
    let stepper = Stepper::new(mesh, op, potential, config)?;
    let reference_modulus: Option<Vec<f64>> = reference.map(|r| r.values.iter().map(|z| z.norm()).collect());
    let samples = PolarSamples::new(mesh);
    let total = config.n_steps();
    let stride = if config.snapshot_stride == 0 { total } else { config.snapshot_stride };

    let measure = |u: &[Complex64], t: f64| -> Observables {
        let v = samples.total(potential, t);
        let err_gs = reference_modulus.as_ref().map(|r| {
            let diff: Vec<Complex64> = u.iter().zip(r).map(|(z, m)| Complex64::new(z.norm() - m, 0.0)).collect();
            field::norm_raw(op.areas(), &diff)
        });
        Observables {
            t,
            mass: field::norm_raw(op.areas(), u).powi(2),
            energy: energy_raw(op, u, &v, config.physics()),
            err_gs,
        }
    };

    let mut u = u0.values.clone();
    let mut observables = Vec::new();
    let mut step = 0;
    loop {
        let t = step as f64 * config.tau;
        let obs = measure(&u, t);
        observables.push(obs);
        observer(&Snapshot {
            step,
            t,
            state: u0.with_values(u.clone()),
            observables: obs,
        })?;
        if step == total {
            break;
        }
        let chunk = stride.min(total - step);
        stepper.advance(&mut u, t, chunk, step)?;
        step += chunk;
    }
    Ok(Trajectory {
        final_state: u0.with_values(u),
        steps: total,
        observables,
    })
}

/// Ground state with its sign flipped on `x₁ ≤ 0`, damped by
/// `exp(-0.1 / |x₁|)` and renormalized.
pub fn make_unstable_state(u_gs: &Field, mesh: &RingMesh) -> Result<Field> {
    u_gs.check_mesh(mesh)?;
    let values = u_gs
        .values
        .iter()
        .zip(&mesh.circumcenters)
        .map(|(z, c)| {
            let x1 = c.x;
            let damping = if x1 == 0.0 { 0.0 } else { (-0.1 / x1.abs()).exp() };
            let sign = if x1 > 0.0 { 1.0 } else { -1.0 };
            z * (sign * damping)
        })
        .collect();
    let mut out = u_gs.with_values(values);
    field::normalize(mesh, &mut out)?;
    Ok(out)
}

/// `log₂(‖y_{2τ} - y_τ‖ / ‖y_τ - y_{τ/2}‖)`.
pub fn order_estimate(mesh: &RingMesh, y_2tau: &Field, y_tau: &Field, y_half: &Field) -> Result<f64> {
    y_2tau.check_mesh(mesh)?;
    y_tau.check_mesh(mesh)?;
    y_half.check_mesh(mesh)?;
    let d = |a: &Field, b: &Field| {
        let diff: Vec<Complex64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
        field::norm_raw(&mesh.areas, &diff)
    };
    Ok((d(y_2tau, y_tau) / d(y_tau, y_half)).log2())
}
