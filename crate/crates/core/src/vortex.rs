//! Vortex detection: the density-shell algorithm with phase unwinding, and
//! thresholding of the regularized vorticity or the pseudo-vorticity.

use std::collections::{HashSet, VecDeque};
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, RealField};
use crate::fv::{discrete_curl, discrete_gradient, BoundaryCondition};
use crate::geometry::Vec2;
use crate::mesh::{triangle_shells, RingMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMethod {
    Density,
    RegVorticity,
    PseudoVorticity,
}

impl fmt::Display for DetectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectionMethod::Density => "density",
            DetectionMethod::RegVorticity => "reg_vorticity",
            DetectionMethod::PseudoVorticity => "pseudo_vorticity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexRecord {
    pub triangle: usize,
    pub position: Vec2,
    /// Winding number (density method) or sign of the extremum.
    pub index: i32,
    /// Characteristic shell radius, 0 for the vorticity methods.
    pub lambda: usize,
    pub method: DetectionMethod,
    /// Extremal vorticity value, or `|ψ|²` at the center for the density method.
    pub extremum: f64,
    /// False when the winding quotient is more than 0.25 away from an integer.
    pub reliable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    pub tol1: f64,
    pub tol2: f64,
    pub lambda_max: usize,
    pub delta: f64,
    pub vort_threshold: f64,
    /// Boundary treatment of the gradient reconstruction.
    pub bc: BoundaryCondition,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            tol1: 0.1,
            tol2: 0.05,
            lambda_max: 10,
            delta: 0.1,
            vort_threshold: 50.0,
            bc: BoundaryCondition::Dirichlet,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol1 > 0.0) {
            return Err(Error::param("tol1", format!("must be positive, got {}", self.tol1)));
        }
        if !(self.tol2 > 0.0) {
            return Err(Error::param("tol2", format!("must be positive, got {}", self.tol2)));
        }
        if self.lambda_max == 0 {
            return Err(Error::param("lambda_max", "must be >= 1"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::param("delta", format!("must be positive, got {}", self.delta)));
        }
        if !(self.vort_threshold > 0.0) {
            return Err(Error::param(
                "vort_threshold",
                format!("must be positive, got {}", self.vort_threshold),
            ));
        }
        Ok(())
    }
}

/// Winding of the phase around a shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding {
    pub index: i32,
    /// Distance of the raw quotient to the nearest integer.
    pub defect: f64,
    pub reliable: bool,
}

/// Unwrap the phase of `values` taken in order, closing the loop on the
/// first entry, and return the winding quotient `(θ_M - θ_0) / 2π`.
pub fn unwrap_winding(values: &[Complex64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let theta0 = values[0].arg();
    let mut theta = theta0;
    for z in values[1..].iter().chain(std::iter::once(&values[0])) {
        let raw = z.arg();
        let l = ((theta - raw) / (2.0 * PI)).round();
        let next = raw + 2.0 * PI * l;
        debug_assert!((next - theta).abs() <= PI + 1e-12);
        theta = next;
    }
    (theta - theta0) / (2.0 * PI)
}

/// Winding of `u` around triangle `center` on its shell `S_λ`, traversed
/// counter-clockwise by polar angle about the center's circumcenter.
pub fn vortex_index(mesh: &RingMesh, u: &Field, center: usize, lambda: usize) -> Result<Winding> {
    u.check_mesh(mesh)?;
    if center >= mesh.n_triangles() || lambda == 0 {
        return Err(Error::param("lambda", "center must be a triangle and lambda >= 1"));
    }
    let shells = triangle_shells(mesh, center, lambda);
    Ok(shell_winding(mesh, &u.values, center, &shells[lambda]))
}

fn shell_winding(mesh: &RingMesh, u: &[Complex64], center: usize, shell: &[usize]) -> Winding {
    let origin = mesh.circumcenters[center];
    let mut ring: Vec<(f64, usize)> = shell
        .iter()
        .map(|&j| ((mesh.circumcenters[j] - origin).angle(), j))
        .collect();
    ring.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let values: Vec<Complex64> = ring.iter().map(|&(_, j)| u[j]).collect();
    if values.is_empty() || values.iter().any(|z| z.norm_sqr() == 0.0) {
        return Winding {
            index: 0,
            defect: 0.5,
            reliable: false,
        };
    }
    let q = unwrap_winding(&values);
    let index = q.round();
    let defect = (q - index).abs();
    Winding {
        index: index as i32,
        defect,
        reliable: defect <= 0.25,
    }
}

/// Density-shell detection. Records with zero winding are dropped.
pub fn detect_by_density(mesh: &RingMesh, u: &Field, params: &DetectionParams) -> Result<Vec<VortexRecord>> {
    u.check_mesh(mesh)?;
    params.validate()?;
    let rho: Vec<f64> = u.values.iter().map(|z| z.norm_sqr()).collect();

    // Steps 1 and 2
    let candidates: Vec<usize> = (0..rho.len()).filter(|&k| rho[k] < params.tol1).collect();
    let mut accepted: Vec<(usize, usize, Vec<Vec<usize>>)> = candidates
        .par_iter()
        .filter_map(|&k| {
            let shells = triangle_shells(mesh, k, params.lambda_max);
            let lambda = (1..=params.lambda_max).find(|&l| {
                !shells[l].is_empty() && shells[l].iter().all(|&j| rho[j] > rho[k] + params.tol2)
            })?;
            Some((k, lambda, shells))
        })
        .collect();

    // Step 3: keep centers in ascending |ψ|², dropping any center inside the
    // shell union of one already kept.
    accepted.sort_by(|a, b| rho[a.0].total_cmp(&rho[b.0]).then(a.0.cmp(&b.0)));
    let mut blocked: HashSet<usize> = HashSet::new();
    let mut kept = Vec::new();
    for (k, lambda, shells) in accepted {
        if blocked.contains(&k) {
            continue;
        }
        blocked.extend(shells[1..].iter().flatten().copied());
        kept.push((k, lambda, shells));
    }

    // Step 4
    let mut records: Vec<VortexRecord> = kept
        .into_iter()
        .filter_map(|(k, lambda, shells)| {
            let w = shell_winding(mesh, &u.values, k, &shells[lambda]);
            (w.index != 0).then(|| VortexRecord {
                triangle: k,
                position: mesh.circumcenters[k],
                index: w.index,
                lambda,
                method: DetectionMethod::Density,
                extremum: rho[k],
                reliable: w.reliable,
            })
        })
        .collect();
    records.sort_by_key(|r| r.triangle);
    Ok(records)
}

/// `Im(ψ̄ ∇ψ)` per triangle, divided by `|ψ|² + δ`.
fn velocity(mesh: &RingMesh, u: &[Complex64], delta: f64, bc: BoundaryCondition) -> Vec<Vec2> {
    let grad = discrete_gradient(mesh, u, bc);
    u.iter()
        .zip(&grad)
        .map(|(z, g)| {
            let jx = (z.conj() * g[0]).im;
            let jy = (z.conj() * g[1]).im;
            Vec2::new(jx, jy) * (1.0 / (z.norm_sqr() + delta))
        })
        .collect()
}

/// `ω_δ = ∇ × (Im(ψ̄∇ψ) / (|ψ|² + δ))`.
pub fn regularized_vorticity(mesh: &RingMesh, u: &Field, delta: f64, bc: BoundaryCondition) -> Result<RealField> {
    u.check_mesh(mesh)?;
    if !(delta > 0.0) {
        return Err(Error::param("delta", format!("must be positive, got {delta}")));
    }
    let v = velocity(mesh, &u.values, delta, bc);
    RealField::from_values(mesh, discrete_curl(mesh, &v))
}

/// `ω_ps = ∇(Re ψ) × ∇(Im ψ)`.
pub fn pseudo_vorticity(mesh: &RingMesh, u: &Field, bc: BoundaryCondition) -> Result<RealField> {
    u.check_mesh(mesh)?;
    let grad = discrete_gradient(mesh, &u.values, bc);
    let w = grad
        .iter()
        .map(|g| g[0].re * g[1].im - g[1].re * g[0].im)
        .collect();
    RealField::from_values(mesh, w)
}

/// One record per vertex-connected component of same-sign triangles with
/// `|ω| > threshold`, placed at the component's extremal triangle.
pub fn detect_by_vorticity(
    mesh: &RingMesh,
    w: &RealField,
    threshold: f64,
    method: DetectionMethod,
) -> Result<Vec<VortexRecord>> {
    w.check_mesh(mesh)?;
    if !(threshold > 0.0) {
        return Err(Error::param("threshold", format!("must be positive, got {threshold}")));
    }
    let values = &w.values;
    let sign = |k: usize| -> i32 {
        if values[k] > threshold {
            1
        } else if values[k] < -threshold {
            -1
        } else {
            0
        }
    };
    let mut seen = vec![false; values.len()];
    let mut records = Vec::new();
    for start in 0..values.len() {
        let s = sign(start);
        if s == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut best = start;
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            if values[k].abs() > values[best].abs() {
                best = k;
            }
            for &n in &mesh.vertex_neighbors[k] {
                if !seen[n] && sign(n) == s {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        records.push(VortexRecord {
            triangle: best,
            position: mesh.circumcenters[best],
            index: s,
            lambda: 0,
            method,
            extremum: values[best],
            reliable: true,
        });
    }
    records.sort_by_key(|r| r.triangle);
    Ok(records)
}

/// Run one detection method with the given parameters.
pub fn detect(mesh: &RingMesh, u: &Field, method: DetectionMethod, params: &DetectionParams) -> Result<Vec<VortexRecord>> {
    params.validate()?;
    match method {
        DetectionMethod::Density => detect_by_density(mesh, u, params),
        DetectionMethod::RegVorticity => {
            let w = regularized_vorticity(mesh, u, params.delta, params.bc)?;
            detect_by_vorticity(mesh, &w, params.vort_threshold, method)
        }
        DetectionMethod::PseudoVorticity => {
            let w = pseudo_vorticity(mesh, u, params.bc)?;
            detect_by_vorticity(mesh, &w, params.vort_threshold, method)
        }
    }
}

/// Sum of indices.
pub fn net_charge(records: &[VortexRecord]) -> i32 {
    records.iter().map(|r| r.index).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshParams;

    fn mesh() -> RingMesh {
        RingMesh::build(&MeshParams::new(0.6, 1.4, 0.06)).unwrap()
    }

    fn nearest(mesh: &RingMesh, p: Vec2) -> usize {
        (0..mesh.n_triangles())
            .min_by(|&a, &b| mesh.circumcenters[a].distance(p).total_cmp(&mesh.circumcenters[b].distance(p)))
            .unwrap()
    }

    #[test]
    fn unwinding_counts_turns() {
        let circle = |n: i32, m: usize| -> Vec<Complex64> {
            (0..m)
                .map(|j| Complex64::from_polar(1.0, n as f64 * 2.0 * PI * j as f64 / m as f64))
                .collect()
        };
        assert_eq!(unwrap_winding(&circle(1, 9)).round(), 1.0);
        assert_eq!(unwrap_winding(&circle(-1, 9)).round(), -1.0);
        assert_eq!(unwrap_winding(&circle(2, 12)).round(), 2.0);
        assert_eq!(unwrap_winding(&circle(0, 12)), 0.0);
    }

    #[test]
    fn linear_vortex_found_at_its_zero() {
        let mesh = mesh();
        let k0 = (0..mesh.n_triangles())
            .find(|&k| (mesh.circumcenter_radius(k) - 1.0).abs() < 0.03)
            .unwrap();
        let c = mesh.circumcenters[k0];
        let u = Field::from_fn(&mesh, |_, x| Complex64::new(x.x - c.x, x.y - c.y) * (1.0 + 0.1 * x.x));
        let params = DetectionParams::default();
        let found = detect_by_density(&mesh, &u, &params).unwrap();
        assert_eq!(found.len(), 1, "{found:?}");
        assert_eq!(found[0].triangle, k0);
        assert_eq!(found[0].index, 1);
        let conj = detect_by_density(&mesh, &u.conj(), &params).unwrap();
        assert_eq!(conj[0].index, -1);
        let w = vortex_index(&mesh, &u.map(|z| z * z), k0, found[0].lambda).unwrap();
        assert_eq!(w.index, 2);
    }

    #[test]
    fn no_low_density_no_vortex() {
        let mesh = mesh();
        let u = Field::from_fn(&mesh, |_, x| Complex64::from_polar(1.0, 3.0 * x.angle()));
        assert!(detect_by_density(&mesh, &u, &DetectionParams::default()).unwrap().is_empty());
    }

    #[test]
    fn vorticity_of_real_field_vanishes() {
        let mesh = mesh();
        let u = Field::from_fn(&mesh, |_, x| Complex64::new(x.x * x.y + 1.0, 0.0));
        let w = regularized_vorticity(&mesh, &u, 0.1, BoundaryCondition::Neumann).unwrap();
        assert!(w.values.iter().all(|&v| v == 0.0));
        let p = pseudo_vorticity(&mesh, &u, BoundaryCondition::Neumann).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pseudo_vorticity_of_identity_map() {
        let mesh = mesh();
        let u = Field::from_fn(&mesh, |_, x| Complex64::new(x.x, x.y));
        let p = pseudo_vorticity(&mesh, &u, BoundaryCondition::Neumann).unwrap();
        for k in (0..mesh.n_triangles()).filter(|&k| !mesh.is_boundary_triangle(k)) {
            assert!((p.values[k] - 1.0).abs() < 1e-8);
        }
        let swapped = u.map(|z| Complex64::new(z.im, z.re));
        let q = pseudo_vorticity(&mesh, &swapped, BoundaryCondition::Neumann).unwrap();
        for (a, b) in p.values.iter().zip(&q.values) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn plane_wave_has_little_vorticity() {
        let mesh = mesh();
        let u = Field::from_fn(&mesh, |_, x| Complex64::from_polar(0.8, 2.0 * x.x - x.y));
        let w = regularized_vorticity(&mesh, &u, 0.1, BoundaryCondition::Neumann).unwrap();
        let interior = (0..mesh.n_triangles()).filter(|&k| {
            !mesh.is_boundary_triangle(k) && mesh.edge_neighbors[k].iter().all(|&l| !mesh.is_boundary_triangle(l))
        });
        let worst = interior.map(|k| w.values[k].abs()).fold(0.0, f64::max);
        assert!(worst < 0.5, "{worst}");
    }

    #[test]
    fn vorticity_components_split_by_sign() {
        let mesh = mesh();
        let a = nearest(&mesh, Vec2::new(1.0, 0.0));
        let b = nearest(&mesh, Vec2::new(-1.0, 0.0));
        let mut w = RealField::zeros(&mesh);
        w.values[a] = 10.0;
        for &n in &mesh.vertex_neighbors[a] {
            w.values[n] = 5.0;
        }
        w.values[b] = -7.0;
        let recs = detect_by_vorticity(&mesh, &w, 1.0, DetectionMethod::PseudoVorticity).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().any(|r| r.triangle == a && r.index == 1));
        assert!(recs.iter().any(|r| r.triangle == b && r.index == -1));
        assert!(detect_by_vorticity(&mesh, &RealField::zeros(&mesh), 1.0, DetectionMethod::PseudoVorticity)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn bad_params_rejected() {
        let p = DetectionParams { lambda_max: 0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = DetectionParams { delta: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
