use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::linalg::Scalar;
use crate::mesh::RingMesh;

/// One value per triangle of a specific mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T = Complex64> {
    pub values: Vec<T>,
    mesh_id: u64,
}

pub type RealField = Field<f64>;

impl<T: Scalar> Field<T> {
    pub fn zeros(mesh: &RingMesh) -> Self {
        Field {
            values: vec![T::zero(); mesh.n_triangles()],
            mesh_id: mesh.id(),
        }
    }

    pub fn from_values(mesh: &RingMesh, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.n_triangles() {
            return Err(Error::MeshMismatch {
                left: values.len(),
                right: mesh.n_triangles(),
            });
        }
        Ok(Field {
            values,
            mesh_id: mesh.id(),
        })
    }

    /// Sample a function of (triangle index, circumcenter).
    pub fn from_fn(mesh: &RingMesh, mut f: impl FnMut(usize, Vec2) -> T) -> Self {
        Field {
            values: mesh.circumcenters.iter().enumerate().map(|(k, &x)| f(k, x)).collect(),
            mesh_id: mesh.id(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn check_mesh(&self, mesh: &RingMesh) -> Result<()> {
        if self.mesh_id != mesh.id() || self.values.len() != mesh.n_triangles() {
            return Err(Error::MeshMismatch {
                left: self.values.len(),
                right: mesh.n_triangles(),
            });
        }
        Ok(())
    }

    pub fn check_same(&self, other: &Field<T>) -> Result<()> {
        if self.mesh_id != other.mesh_id || self.values.len() != other.values.len() {
            return Err(Error::MeshMismatch {
                left: self.values.len(),
                right: other.values.len(),
            });
        }
        Ok(())
    }

    /// Same mesh as a field of another scalar type.
    pub fn check_same_len<S: Scalar>(&self, other: &Field<S>) -> Result<()> {
        if self.mesh_id != other.mesh_id() || self.values.len() != other.len() {
            return Err(Error::MeshMismatch {
                left: self.values.len(),
                right: other.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn from_raw(mesh_id: u64, values: Vec<T>) -> Self {
        Field { values, mesh_id }
    }

    pub(crate) fn with_values(&self, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Field {
            values,
            mesh_id: self.mesh_id,
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl Field<Complex64> {
    pub fn from_real(real: &RealField) -> Self {
        real.map_to(|v| Complex64::new(v, 0.0))
    }

    pub fn modulus(&self) -> RealField {
        self.map_to(|v| v.norm())
    }

    pub fn density(&self) -> RealField {
        self.map_to(|v| v.norm_sqr())
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn re(&self) -> RealField {
        self.map_to(|v| v.re)
    }

    pub fn im(&self) -> RealField {
        self.map_to(|v| v.im)
    }
}

impl<T: Scalar> Field<T> {
    pub fn map_to<S: Scalar>(&self, f: impl Fn(T) -> S) -> Field<S> {
        Field {
            values: self.values.iter().map(|&v| f(v)).collect(),
            mesh_id: self.mesh_id,
        }
    }
}

/// `Σ U_K conj(V_K) |K|`.
pub fn complex_pairing(mesh: &RingMesh, u: &Field, v: &Field) -> Result<Complex64> {
    u.check_mesh(mesh)?;
    v.check_mesh(mesh)?;
    Ok(pairing_raw(&mesh.areas, &u.values, &v.values))
}

/// `⟨U, V⟩_T = Re Σ U_K conj(V_K) |K|`.
pub fn inner_product(mesh: &RingMesh, u: &Field, v: &Field) -> Result<f64> {
    complex_pairing(mesh, u, v).map(|z| z.re)
}

/// `‖U‖_{L²(T)}`.
pub fn norm(mesh: &RingMesh, u: &Field) -> Result<f64> {
    u.check_mesh(mesh)?;
    Ok(norm_raw(&mesh.areas, &u.values))
}

pub(crate) fn pairing_raw(areas: &[f64], u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter()
        .zip(v)
        .zip(areas)
        .fold(Complex64::new(0.0, 0.0), |acc, ((a, b), w)| acc + a * b.conj() * *w)
}

pub(crate) fn real_inner_raw(areas: &[f64], u: &[Complex64], v: &[Complex64]) -> f64 {
    u.iter()
        .zip(v)
        .zip(areas)
        .map(|((a, b), w)| (a.re * b.re + a.im * b.im) * w)
        .sum()
}

pub(crate) fn norm_raw(areas: &[f64], u: &[Complex64]) -> f64 {
    u.iter().zip(areas).map(|(a, w)| a.norm_sqr() * w).sum::<f64>().sqrt()
}

/// Rescale to unit `L²(T)` norm. Returns the norm before scaling.
pub fn normalize(mesh: &RingMesh, u: &mut Field) -> Result<f64> {
    let n = norm(mesh, u)?;
    if n == 0.0 || !n.is_finite() {
        return Err(Error::param("field", format!("cannot normalize a field of norm {n}")));
    }
    for v in &mut u.values {
        *v /= n;
    }
    Ok(n)
}
