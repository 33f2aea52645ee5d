//! Two-point flux approximation of the Laplacian on an admissible
//! triangulation, plus diamond-point gradient and edge-circulation curl
//! reconstructions.
//!
//! Sign convention: `A_T` approximates `Δ` and is negative semi-definite for
//! the weighted product `⟨U, V⟩_T`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, RealField};
use crate::geometry::Vec2;
use crate::linalg::{CsrMatrix, EnvelopePattern, Scalar};
use crate::mesh::{verify_admissibility, RingMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

impl std::str::FromStr for BoundaryCondition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(BoundaryCondition::Dirichlet),
            "neumann" => Ok(BoundaryCondition::Neumann),
            other => Err(format!("unknown boundary condition `{other}`")),
        }
    }
}

impl std::fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
        })
    }
}

/// Transmissivity `|σ| / d` of an edge.
fn transmissivity(e: &crate::mesh::Edge) -> f64 {
    e.length / e.distance
}

/// The assembled operator pair `(A, A_T)`.
#[derive(Debug, Clone)]
pub struct LaplacianOperator {
    /// Flux form: row `K` is `Σ_σ D_{K,σ}`.
    pub a: CsrMatrix,
    /// `A` with row `K` divided by `|K|`.
    pub a_t: CsrMatrix,
    pub bc: BoundaryCondition,
    areas: Vec<f64>,
    /// `(K, L or None, transmissivity)` per edge, for flux-form application.
    fluxes: Vec<(usize, Option<usize>, f64)>,
    pattern: Arc<EnvelopePattern>,
    mesh_id: u64,
}

impl LaplacianOperator {
    pub fn assemble(mesh: &RingMesh, bc: BoundaryCondition) -> Result<LaplacianOperator> {
        let report = verify_admissibility(mesh);
        if !report.pass {
            return Err(Error::NotAdmissible(format!(
                "max angle {:.6}, orthogonality defect {:.3e}",
                report.max_angle, report.max_orthogonality_defect
            )));
        }
        let n = mesh.n_triangles();
        let mut triplets = Vec::with_capacity(4 * mesh.edges.len());
        let mut fluxes = Vec::with_capacity(mesh.edges.len());
        for e in &mesh.edges {
            let t = transmissivity(e);
            let k = e.inner;
            match e.outer {
                Some(l) => {
                    triplets.push((k, k, -t));
                    triplets.push((k, l, t));
                    triplets.push((l, l, -t));
                    triplets.push((l, k, t));
                    fluxes.push((k, Some(l), t));
                }
                None => {
                    if bc == BoundaryCondition::Dirichlet {
                        triplets.push((k, k, -t));
                        fluxes.push((k, None, t));
                    }
                }
            }
        }
        // keep the diagonal in the pattern even for isolated Neumann rows
        for k in 0..n {
            triplets.push((k, k, 0.0));
        }
        let a = CsrMatrix::from_triplets(n, &triplets);
        let scaled: Vec<(usize, usize, f64)> = a
            .triplets()
            .map(|(r, c, v)| (r, c, v / mesh.areas[r]))
            .collect();
        let a_t = CsrMatrix::from_triplets(n, &scaled);
        let pattern = Arc::new(EnvelopePattern::for_matrix(&a));
        Ok(LaplacianOperator {
            a,
            a_t,
            bc,
            areas: mesh.areas.clone(),
            fluxes,
            pattern,
            mesh_id: mesh.id(),
        })
    }

    pub fn dim(&self) -> usize {
        self.areas.len()
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn pattern(&self) -> Arc<EnvelopePattern> {
        Arc::clone(&self.pattern)
    }

    /// `A_T U` evaluated edge by edge, so constants are annihilated exactly
    /// under Neumann conditions.
    pub fn apply_raw<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); u.len()];
        for &(k, l, t) in &self.fluxes {
            match l {
                Some(l) => {
                    let flux = (u[l] - u[k]).scale(t);
                    out[k] += flux;
                    out[l] -= flux;
                }
                None => out[k] -= u[k].scale(t),
            }
        }
        for (o, a) in out.iter_mut().zip(&self.areas) {
            *o = o.scale(1.0 / a);
        }
        out
    }

    /// Flux form `A U` (not divided by the areas).
    pub fn apply_flux_raw<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        let mut out = self.apply_raw(u);
        for (o, a) in out.iter_mut().zip(&self.areas) {
            *o = o.scale(*a);
        }
        out
    }

    pub fn apply<T: Scalar>(&self, u: &Field<T>) -> Result<Field<T>> {
        self.check(u)?;
        Ok(u.with_values(self.apply_raw(&u.values)))
    }

    pub fn check<T: Scalar>(&self, u: &Field<T>) -> Result<()> {
        if u.mesh_id() != self.mesh_id || u.len() != self.dim() {
            return Err(Error::MeshMismatch {
                left: u.len(),
                right: self.dim(),
            });
        }
        Ok(())
    }
}

/// Per-triangle gradient `(∂x, ∂y)`.
pub type Gradient<T> = Vec<[T; 2]>;

/// Diamond-point gradient reconstruction
/// `∇U|_K ≈ (1/|K|) Σ_σ dU_{K,σ} (x_σ - x_K)`.
///
/// With Dirichlet conditions the boundary contribution is `-T_σ U_K`
/// (zero boundary value); with Neumann conditions it is dropped.
pub fn discrete_gradient<T: Scalar>(mesh: &RingMesh, u: &[T], bc: BoundaryCondition) -> Gradient<T> {
    assert_eq!(u.len(), mesh.n_triangles());
    let mut grad = vec![[T::zero(); 2]; u.len()];
    for e in &mesh.edges {
        let t = transmissivity(e);
        let k = e.inner;
        match e.outer {
            Some(l) => {
                let du = (u[l] - u[k]).scale(t);
                let rk = e.midpoint - mesh.circumcenters[k];
                let rl = e.midpoint - mesh.circumcenters[l];
                grad[k][0] += du.scale(rk.x);
                grad[k][1] += du.scale(rk.y);
                grad[l][0] -= du.scale(rl.x);
                grad[l][1] -= du.scale(rl.y);
            }
            None if bc == BoundaryCondition::Dirichlet => {
                let du = -u[k].scale(t);
                let rk = e.midpoint - mesh.circumcenters[k];
                grad[k][0] += du.scale(rk.x);
                grad[k][1] += du.scale(rk.y);
            }
            None => {}
        }
    }
    for (g, a) in grad.iter_mut().zip(&mesh.areas) {
        g[0] = g[0].scale(1.0 / a);
        g[1] = g[1].scale(1.0 / a);
    }
    grad
}

/// Gradient of a complex field.
pub fn field_gradient(mesh: &RingMesh, u: &Field, bc: BoundaryCondition) -> Result<Gradient<Complex64>> {
    u.check_mesh(mesh)?;
    Ok(discrete_gradient(mesh, &u.values, bc))
}

/// Curl of an edge-sampled vector field:
/// `ω(K) = (1/|K|) Σ_σ |σ| v(σ)·τ_{K,σ}` with `τ_{K,σ}` the counter-clockwise
/// tangent of `∂K`.
pub fn discrete_curl_edges(mesh: &RingMesh, edge_values: &[Vec2]) -> Vec<f64> {
    assert_eq!(edge_values.len(), mesh.edges.len());
    let mut curl = vec![0.0; mesh.n_triangles()];
    for (e, v) in mesh.edges.iter().zip(edge_values) {
        let circulation = e.length * v.dot(e.tangent);
        curl[e.inner] += circulation;
        if let Some(l) = e.outer {
            curl[l] -= circulation;
        }
    }
    for (c, a) in curl.iter_mut().zip(&mesh.areas) {
        *c /= a;
    }
    curl
}

/// Curl of a per-triangle vector field; edge values are the mean of the two
/// adjacent triangles (the inside value on the boundary).
pub fn discrete_curl(mesh: &RingMesh, cell_values: &[Vec2]) -> Vec<f64> {
    assert_eq!(cell_values.len(), mesh.n_triangles());
    let edge_values: Vec<Vec2> = mesh
        .edges
        .iter()
        .map(|e| match e.outer {
            Some(l) => (cell_values[e.inner] + cell_values[l]) * 0.5,
            None => cell_values[e.inner],
        })
        .collect();
    discrete_curl_edges(mesh, &edge_values)
}

pub fn curl_field(mesh: &RingMesh, cell_values: &[Vec2]) -> RealField {
    RealField::from_values(mesh, discrete_curl(mesh, cell_values)).expect("length matches mesh")
}
