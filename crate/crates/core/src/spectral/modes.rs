//! Mode basis `Φ_{p,ℓ} = φ_{p,ℓ}(r) e^{iℓθ}` sampled on the mesh, and the
//! decomposition of a field on it.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{self, Field};
use crate::mesh::RingMesh;
use crate::spectral::radial::{radial_modes, RadialParams};

#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub p_max: usize,
    pub l_max: usize,
    /// Radial grid intervals.
    pub n: usize,
    /// Indexed by [`ModeBasis::index`].
    pub fields: Vec<Field>,
    pub eigenvalues: Vec<f64>,
}

impl ModeBasis {
    pub fn index(&self, p: usize, ell: i32) -> usize {
        p * (2 * self.l_max + 1) + (ell + self.l_max as i32) as usize
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// `(p, ℓ)` of every stored mode, in storage order.
    pub fn labels(&self) -> impl Iterator<Item = (usize, i32)> + '_ {
        let l = self.l_max as i32;
        (0..=self.p_max).flat_map(move |p| (-l..=l).map(move |ell| (p, ell)))
    }

    pub fn field(&self, p: usize, ell: i32) -> &Field {
        &self.fields[self.index(p, ell)]
    }

    /// Largest `|⟨Φ_a, Φ_b⟩|` over distinct modes.
    pub fn max_off_pair_pairing(&self, mesh: &RingMesh) -> f64 {
        let areas = &mesh.areas;
        (0..self.len())
            .into_par_iter()
            .map(|a| {
                ((a + 1)..self.len())
                    .map(|b| field::pairing_raw(areas, &self.fields[a].values, &self.fields[b].values).norm())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Build `(P+1)(2L+1)` normalized mode fields from radial eigenvectors on
/// `n` grid intervals, linearly interpolated at the circumcenter radii.
pub fn mode_basis(mesh: &RingMesh, p_max: usize, l_max: usize, n: usize, params: &RadialParams) -> Result<ModeBasis> {
    params.validate()?;
    let radii: Vec<f64> = mesh.circumcenters.iter().map(|c| c.norm()).collect();
    let angles: Vec<f64> = mesh.circumcenters.iter().map(|c| c.angle()).collect();
    if radii.iter().any(|&r| r < params.r_min || r > params.r_max) {
        return Err(Error::param("r_min", "mesh extends outside the radial interval"));
    }
    let per_ell: Vec<(usize, Vec<Field>, Vec<f64>)> = (0..=l_max)
        .into_par_iter()
        .map(|ell| -> Result<_> {
            let modes = radial_modes(ell as i32, p_max, n, params)?;
            let mut fields = Vec::with_capacity(2 * (p_max + 1));
            for p in 0..=p_max {
                let profile: Vec<f64> = radii.iter().map(|&r| modes.interpolate(p, r)).collect();
                for sign in [-1.0, 1.0] {
                    let mut f = Field::from_fn(mesh, |k, _| {
                        Complex64::from_polar(profile[k], sign * ell as f64 * angles[k])
                    });
                    field::normalize(mesh, &mut f)?;
                    fields.push(f);
                }
            }
            Ok((ell, fields, modes.eigenvalues))
        })
        .collect::<Result<_>>()?;

    let width = 2 * l_max + 1;
    let total = (p_max + 1) * width;
    let mut fields: Vec<Option<Field>> = vec![None; total];
    let mut eigenvalues = vec![0.0; total];
    for (ell, fs, eig) in per_ell {
        let mut it = fs.into_iter();
        for (p, &lambda) in eig.iter().enumerate() {
            let minus = it.next().expect("two fields per radial mode");
            let plus = it.next().expect("two fields per radial mode");
            let l = l_max as i32;
            let i_plus = p * width + (ell as i32 + l) as usize;
            let i_minus = p * width + (l - ell as i32) as usize;
            eigenvalues[i_plus] = lambda;
            eigenvalues[i_minus] = lambda;
            fields[i_minus] = Some(minus);
            fields[i_plus] = Some(plus);
        }
    }
    Ok(ModeBasis {
        p_max,
        l_max,
        n,
        fields: fields.into_iter().map(|f| f.expect("every slot filled")).collect(),
        eigenvalues,
    })
}

/// Coefficients `c_{p,ℓ} = Σ U_K conj(Φ_{p,ℓ}(K)) |K|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients {
    pub p_max: usize,
    pub l_max: usize,
    pub values: Vec<Complex64>,
}

impl ModeCoefficients {
    pub fn get(&self, p: usize, ell: i32) -> Complex64 {
        self.values[p * (2 * self.l_max + 1) + (ell + self.l_max as i32) as usize]
    }

    /// `(p, ℓ, c)` rows in storage order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, i32, Complex64)> + '_ {
        let width = 2 * self.l_max + 1;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &c)| (i / width, (i % width) as i32 - self.l_max as i32, c))
    }

    pub fn total_weight(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `Σ |c|²` over odd and even `ℓ`.
    pub fn parity_weights(&self) -> (f64, f64) {
        self.rows().fold((0.0, 0.0), |(odd, even), (_, ell, c)| {
            if ell.rem_euclid(2) == 1 {
                (odd + c.norm_sqr(), even)
            } else {
                (odd, even + c.norm_sqr())
            }
        })
    }
}

pub fn decompose(mesh: &RingMesh, u: &Field, basis: &ModeBasis) -> Result<ModeCoefficients> {
    u.check_mesh(mesh)?;
    if let Some(f) = basis.fields.first() {
        f.check_same(u)?;
    }
    let values = basis
        .fields
        .par_iter()
        .map(|phi| field::pairing_raw(&mesh.areas, &u.values, &phi.values))
        .collect();
    Ok(ModeCoefficients {
        p_max: basis.p_max,
        l_max: basis.l_max,
        values,
    })
}

/// Same coefficients as [`decompose`] against [`mode_basis`], for several
/// fields at once, without storing the basis. Memory stays `O(N)` per `ℓ`,
/// which matters for large `L`. Returns one coefficient set per field and the
/// radial eigenvalues in basis order.
pub fn project_onto_modes(
    mesh: &RingMesh,
    fields: &[&Field],
    p_max: usize,
    l_max: usize,
    n: usize,
    params: &RadialParams,
) -> Result<(Vec<ModeCoefficients>, Vec<f64>)> {
    params.validate()?;
    for u in fields {
        u.check_mesh(mesh)?;
    }
    let radii: Vec<f64> = mesh.circumcenters.iter().map(|c| c.norm()).collect();
    let angles: Vec<f64> = mesh.circumcenters.iter().map(|c| c.angle()).collect();
    if radii.iter().any(|&r| r < params.r_min || r > params.r_max) {
        return Err(Error::param("r_min", "mesh extends outside the radial interval"));
    }
    // per ℓ ≥ 0: for each p, the (−ℓ, +ℓ) coefficients of every field
    type PerEll = (usize, Vec<Vec<[Complex64; 2]>>, Vec<f64>);
    let per_ell: Vec<PerEll> = (0..=l_max)
        .into_par_iter()
        .map(|ell| -> Result<PerEll> {
            let modes = radial_modes(ell as i32, p_max, n, params)?;
            let phases: Vec<Complex64> = angles.iter().map(|&a| Complex64::from_polar(1.0, ell as f64 * a)).collect();
            let mut out = Vec::with_capacity(p_max + 1);
            for p in 0..=p_max {
                let profile: Vec<f64> = radii.iter().map(|&r| modes.interpolate(p, r)).collect();
                let norm = profile
                    .iter()
                    .zip(&mesh.areas)
                    .map(|(f, w)| f * f * w)
                    .sum::<f64>()
                    .sqrt();
                if norm == 0.0 || !norm.is_finite() {
                    return Err(Error::param("field", format!("cannot normalize a field of norm {norm}")));
                }
                let coeffs = fields
                    .iter()
                    .map(|u| {
                        let mut minus = Complex64::new(0.0, 0.0);
                        let mut plus = Complex64::new(0.0, 0.0);
                        for k in 0..u.values.len() {
                            let a = u.values[k] * (profile[k] / norm * mesh.areas[k]);
                            // conj(e^{-iℓθ}) = e^{iℓθ}
                            minus += a * phases[k];
                            plus += a * phases[k].conj();
                        }
                        [minus, plus]
                    })
                    .collect();
                out.push(coeffs);
            }
            Ok((ell, out, modes.eigenvalues))
        })
        .collect::<Result<_>>()?;

    let width = 2 * l_max + 1;
    let total = (p_max + 1) * width;
    let l = l_max as i32;
    let mut values = vec![vec![Complex64::new(0.0, 0.0); total]; fields.len()];
    let mut eigenvalues = vec![0.0; total];
    for (ell, per_p, eig) in per_ell {
        for (p, per_field) in per_p.iter().enumerate() {
            let i_plus = p * width + (ell as i32 + l) as usize;
            let i_minus = p * width + (l - ell as i32) as usize;
            eigenvalues[i_plus] = eig[p];
            eigenvalues[i_minus] = eig[p];
            for (f, [minus, plus]) in per_field.iter().enumerate() {
                values[f][i_minus] = *minus;
                values[f][i_plus] = *plus;
            }
        }
    }
    let coefficients = values
        .into_iter()
        .map(|values| ModeCoefficients { p_max, l_max, values })
        .collect();
    Ok((coefficients, eigenvalues))
}
