//! Gaussian ring trap `V_pot(r) = -V0 exp(-2m (r - 1)^2)` and the rotating
//! modulation `V_rot = V_p V_pot(r) sin(n_θ θ - ω t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RealField;
use crate::mesh::RingMesh;

/// Below this rotation rate the time integral uses the static branch.
pub const OMEGA_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub v0: f64,
    pub m: f64,
    pub v_p: f64,
    pub n_theta: u32,
    pub omega: f64,
}

impl Default for PotentialParams {
    fn default() -> Self {
        PotentialParams {
            v0: 100.0,
            m: 10.0,
            v_p: 0.0,
            n_theta: 6,
            omega: 0.0,
        }
    }
}

impl PotentialParams {
    /// `V0 = 0` is accepted so that the trap can be switched off.
    pub fn validate(&self) -> Result<()> {
        if !(self.v0 >= 0.0) || !self.v0.is_finite() {
            return Err(Error::param("v0", format!("must be >= 0, got {}", self.v0)));
        }
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(Error::param("m", format!("must be positive, got {}", self.m)));
        }
        if !(0.0..=1.0).contains(&self.v_p) {
            return Err(Error::param("v_p", format!("must lie in [0, 1], got {}", self.v_p)));
        }
        if self.n_theta == 0 {
            return Err(Error::param("n_theta", "must be >= 1"));
        }
        if !self.omega.is_finite() {
            return Err(Error::param("omega", "must be finite"));
        }
        Ok(())
    }

    pub fn trap_at(&self, r: f64) -> f64 {
        let d = r - 1.0;
        -self.v0 * (-2.0 * self.m * d * d).exp()
    }

    pub fn rotating_at(&self, r: f64, theta: f64, t: f64) -> f64 {
        if self.v_p == 0.0 {
            return 0.0;
        }
        self.v_p * self.trap_at(r) * (self.n_theta as f64 * theta - self.omega * t).sin()
    }

    /// `∫_t^{t+dt} (V_pot + V_rot)(s) ds` at one point.
    pub fn integral_at(&self, r: f64, theta: f64, t: f64, dt: f64) -> f64 {
        let vpot = self.trap_at(r);
        if self.v_p == 0.0 {
            return vpot * dt;
        }
        let a = self.n_theta as f64 * theta;
        let w = self.omega;
        let rotating = if w.abs() < OMEGA_ZERO {
            a.sin() * dt
        } else {
            // (1/ω)[cos(a - ω(t+dt)) - cos(a - ωt)] in a form without cancellation
            let half = 0.5 * w * dt;
            let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
            dt * (a - w * (t + 0.5 * dt)).sin() * sinc
        };
        vpot * dt + self.v_p * vpot * rotating
    }
}

pub fn eval_trap(mesh: &RingMesh, params: &PotentialParams) -> RealField {
    RealField::from_fn(mesh, |k, _| params.trap_at(mesh.circumcenter_radius(k)))
}

pub fn eval_rotating(mesh: &RingMesh, t: f64, params: &PotentialParams) -> RealField {
    RealField::from_fn(mesh, |_, x| params.rotating_at(x.norm(), x.angle(), t))
}

/// Total potential `V_pot + V_rot(t)`.
pub fn eval_total(mesh: &RingMesh, t: f64, params: &PotentialParams) -> RealField {
    RealField::from_fn(mesh, |_, x| {
        let r = x.norm();
        params.trap_at(r) + params.rotating_at(r, x.angle(), t)
    })
}

pub fn phase_integral(mesh: &RingMesh, t: f64, dt: f64, params: &PotentialParams) -> Result<RealField> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    Ok(RealField::from_fn(mesh, |_, x| params.integral_at(x.norm(), x.angle(), t, dt)))
}

/// Per-triangle polar coordinates of the circumcenters, cached for repeated
/// potential evaluation.
#[derive(Debug, Clone)]
pub struct PolarSamples {
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
}

impl PolarSamples {
    pub fn new(mesh: &RingMesh) -> Self {
        PolarSamples {
            r: mesh.circumcenters.iter().map(|c| c.norm()).collect(),
            theta: mesh.circumcenters.iter().map(|c| c.angle()).collect(),
        }
    }

    pub fn integral(&self, params: &PotentialParams, t: f64, dt: f64) -> Vec<f64> {
        self.r
            .iter()
            .zip(&self.theta)
            .map(|(&r, &th)| params.integral_at(r, th, t, dt))
            .collect()
    }

    pub fn total(&self, params: &PotentialParams, t: f64) -> Vec<f64> {
        self.r
            .iter()
            .zip(&self.theta)
            .map(|(&r, &th)| params.trap_at(r) + params.rotating_at(r, th, t))
            .collect()
    }
}
