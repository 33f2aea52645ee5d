//! Discrete energy, its gradient, and the semi-implicit normalized gradient
//! flow with adaptive step halving.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, Field, RealField};
use crate::fv::LaplacianOperator;
use crate::linalg::ShiftedSystem;

/// Smallest imaginary time step before the descent gives up.
pub const KAPPA_FLOOR: f64 = 1e-14;

/// Mass and interaction strength entering the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    pub m: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientFlowConfig {
    pub kappa0: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub gamma: f64,
}

impl Default for GradientFlowConfig {
    fn default() -> Self {
        GradientFlowConfig {
            kappa0: 1e-2,
            epsilon: 5e-3,
            max_iters: 20_000,
            gamma: 100.0,
        }
    }
}

impl GradientFlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa0 > 0.0) || !self.kappa0.is_finite() {
            return Err(Error::param("kappa0", format!("must be positive, got {}", self.kappa0)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::param("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be >= 1"));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::param("gamma", format!("must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub state: Field,
    /// Energy of the initial iterate followed by every accepted step.
    pub energy_history: Vec<f64>,
    pub residual: f64,
    /// Accepted steps.
    pub iterations: usize,
    pub rejected: usize,
    pub kappa_final: f64,
    pub converged: bool,
}

/// `E_T(U) = -(1/2m)⟨U, A_T U⟩ + ⟨U, V U⟩ + (γ/2)⟨U, |U|² U⟩`.
pub fn energy(op: &LaplacianOperator, u: &Field, v: &RealField, physics: Physics) -> Result<f64> {
    op.check(u)?;
    v.check_same_len(u)?;
    Ok(energy_raw(op, &u.values, &v.values, physics))
}

pub(crate) fn energy_raw(op: &LaplacianOperator, u: &[Complex64], v: &[f64], physics: Physics) -> f64 {
    let au = op.apply_raw(u);
    let areas = op.areas();
    let mut kinetic = 0.0;
    let mut rest = 0.0;
    for k in 0..u.len() {
        let (z, a) = (u[k], areas[k]);
        let rho = z.norm_sqr();
        kinetic += (z.re * au[k].re + z.im * au[k].im) * a;
        rest += (v[k] * rho + 0.5 * physics.gamma * rho * rho) * a;
    }
    -kinetic / (2.0 * physics.m) + rest
}

/// `∇E_T(U) = -(1/m) A_T U + 2 V U + 2γ |U|² U`.
pub fn energy_gradient(op: &LaplacianOperator, u: &Field, v: &RealField, physics: Physics) -> Result<Field> {
    op.check(u)?;
    v.check_same_len(u)?;
    Ok(u.with_values(gradient_raw(op, &u.values, &v.values, physics)))
}

fn gradient_raw(op: &LaplacianOperator, u: &[Complex64], v: &[f64], physics: Physics) -> Vec<Complex64> {
    let au = op.apply_raw(u);
    u.iter()
        .zip(&au)
        .zip(v)
        .map(|((&z, &a), &vk)| -a / physics.m + z * (2.0 * vk + 2.0 * physics.gamma * z.norm_sqr()))
        .collect()
}

/// `C_T(U) = ‖∇E - ⟨∇E, U⟩ U‖`.
pub fn residual_criterion(op: &LaplacianOperator, u: &Field, v: &RealField, physics: Physics) -> Result<f64> {
    op.check(u)?;
    v.check_same_len(u)?;
    Ok(residual_raw(op, &u.values, &v.values, physics))
}

fn residual_raw(op: &LaplacianOperator, u: &[Complex64], v: &[f64], physics: Physics) -> f64 {
    let g = gradient_raw(op, u, v, physics);
    let c = field::real_inner_raw(op.areas(), &g, u);
    let projected: Vec<Complex64> = g.iter().zip(u).map(|(gk, uk)| gk - uk * c).collect();
    field::norm_raw(op.areas(), &projected)
}

/// One step: solve `(I - κ[(1/m)A_T - 2V - 2γ|Uⁿ|²]) X = Uⁿ` and normalize.
///
/// The system is multiplied through by the cell areas, which makes it real
/// symmetric; real and imaginary parts are solved with one factorization.
pub fn gradient_flow_step(
    op: &LaplacianOperator,
    u: &Field,
    v: &RealField,
    physics: Physics,
    kappa: f64,
) -> Result<Field> {
    op.check(u)?;
    v.check_same_len(u)?;
    if !(kappa > 0.0) {
        return Err(Error::param("kappa", format!("must be positive, got {kappa}")));
    }
    Ok(u.with_values(step_raw(op, &u.values, &v.values, physics, kappa)?))
}

fn step_raw(
    op: &LaplacianOperator,
    u: &[Complex64],
    v: &[f64],
    physics: Physics,
    kappa: f64,
) -> Result<Vec<Complex64>> {
    let areas = op.areas();
    let diag: Vec<f64> = (0..u.len())
        .map(|k| areas[k] * (1.0 + 2.0 * kappa * (v[k] + physics.gamma * u[k].norm_sqr())))
        .collect();
    let system = ShiftedSystem::new(op.pattern(), &op.a, diag, -kappa / physics.m)?;
    let re: Vec<f64> = u.iter().zip(areas).map(|(z, a)| z.re * a).collect();
    let (xr, _) = system.solve(&re)?;
    let xi = if u.iter().any(|z| z.im != 0.0) {
        let im: Vec<f64> = u.iter().zip(areas).map(|(z, a)| z.im * a).collect();
        system.solve(&im)?.0
    } else {
        vec![0.0; u.len()]
    };
    let mut x: Vec<Complex64> = xr.into_iter().zip(xi).map(|(a, b)| Complex64::new(a, b)).collect();
    let n = field::norm_raw(areas, &x);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::NonFinite { step: 0 });
    }
    for z in &mut x {
        *z /= n;
    }
    Ok(x)
}

/// Normalized constant field, the default initial iterate.
pub fn normalized_constant(op: &LaplacianOperator) -> Vec<Complex64> {
    let total: f64 = op.areas().iter().sum();
    vec![Complex64::new(1.0 / total.sqrt(), 0.0); op.dim()]
}

/// Run the descent until `C_T ≤ ε`. Rejected steps (energy not strictly
/// decreasing, or a failed solve) halve `κ` and leave the state untouched.
/// Hitting `max_iters` returns the partial result with `converged = false`.
pub fn compute_ground_state(
    config: &GradientFlowConfig,
    op: &LaplacianOperator,
    v: &RealField,
    m: f64,
    initial: Option<&Field>,
) -> Result<GroundStateResult> {
    config.validate()?;
    let physics = Physics { m, gamma: config.gamma };
    let mut u = match initial {
        Some(f) => {
            op.check(f)?;
            let n = field::norm_raw(op.areas(), &f.values);
            f.values.iter().map(|z| z / n).collect()
        }
        None => normalized_constant(op),
    };
    if v.len() != u.len() {
        return Err(Error::MeshMismatch { left: v.len(), right: u.len() });
    }
    let mut e = energy_raw(op, &u, &v.values, physics);
    let mut history = vec![e];
    let mut kappa = config.kappa0;
    let mut residual = residual_raw(op, &u, &v.values, physics);
    let mut iterations = 0;
    let mut rejected = 0;
    let mut attempts = 0;
    while residual > config.epsilon && attempts < config.max_iters {
        attempts += 1;
        let candidate = step_raw(op, &u, &v.values, physics, kappa);
        let accepted = match candidate {
            Ok(next) => {
                let e_next = energy_raw(op, &next, &v.values, physics);
                if e_next < e {
                    u = next;
                    e = e_next;
                    true
                } else {
                    false
                }
            }
            Err(Error::SolverFailure { .. }) | Err(Error::ZeroPivot { .. }) | Err(Error::NonFinite { .. }) => false,
            Err(other) => return Err(other),
        };
        if accepted {
            iterations += 1;
            history.push(e);
            residual = residual_raw(op, &u, &v.values, physics);
        } else {
            rejected += 1;
            kappa *= 0.5;
            if kappa < KAPPA_FLOOR {
                return Err(Error::param(
                    "kappa",
                    format!("step size fell below {KAPPA_FLOOR:e} after {iterations} accepted steps, residual {residual:e}"),
                ));
            }
        }
    }
    Ok(GroundStateResult {
        state: Field::from_raw(v.mesh_id(), u),
        energy_history: history,
        residual,
        iterations,
        rejected,
        kappa_final: kappa,
        converged: residual <= config.epsilon,
    })
}
