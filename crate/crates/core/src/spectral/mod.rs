//! Analytic annulus eigenfunctions and the radial mode basis of the linear
//! trapped operator.

pub mod bessel;
pub mod modes;
pub mod radial;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, Field};
use crate::mesh::RingMesh;

pub use bessel::{bessel_j, bessel_y};
pub use modes::{decompose, mode_basis, project_onto_modes, ModeBasis, ModeCoefficients};
pub use radial::{assemble_radial_operator, radial_modes, RadialModes, RadialParams, Tridiagonal};

/// Dirichlet eigenpair of `-Δ` on the annulus:
/// `u = [J_α(r√λ) + c Y_α(r√λ)] cos(αθ)` or `sin(αθ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusEigenpair {
    pub alpha: u32,
    pub beta: u32,
    pub lambda: f64,
    pub c: f64,
}

impl AnnulusEigenpair {
    pub fn radial(&self, r: f64) -> f64 {
        let x = r * self.lambda.sqrt();
        bessel_j(self.alpha, x) + self.c * bessel_y(self.alpha, x).unwrap_or(f64::NAN)
    }
}

/// `f_α(x) = J_α(r_min x) Y_α(r_max x) - J_α(r_max x) Y_α(r_min x)`.
pub fn cross_product(alpha: u32, x: f64, r_min: f64, r_max: f64) -> f64 {
    let (a, b) = (r_min * x, r_max * x);
    let ya = bessel_y(alpha, a).unwrap_or(f64::NAN);
    let yb = bessel_y(alpha, b).unwrap_or(f64::NAN);
    bessel_j(alpha, a) * yb - bessel_j(alpha, b) * ya
}

/// The first `count` Dirichlet eigenpairs of order `alpha`.
pub fn annulus_eigenpairs(alpha: u32, count: usize, r_min: f64, r_max: f64) -> Result<Vec<AnnulusEigenpair>> {
    if count == 0 {
        return Err(Error::param("count", "must be >= 1"));
    }
    if !(r_min > 0.0) || !(r_max > r_min) {
        return Err(Error::param("r_max", "need 0 < r_min < r_max"));
    }
    let width = r_max - r_min;
    // zeros are roughly π / width apart
    let step = PI_OVER_SCAN * std::f64::consts::PI / width;
    let lo = 1e-3;
    let hi = (alpha as f64 / r_min + (count as f64 + 2.0) * std::f64::consts::PI / width) * 2.0 + 10.0;
    let f = |x: f64| cross_product(alpha, x, r_min, r_max);
    let mut roots = Vec::with_capacity(count);
    let mut a = lo;
    let mut fa = f(a);
    while roots.len() < count && a < hi {
        let b = a + step;
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            roots.push(bisect(&f, a, b, fa));
        }
        a = b;
        fa = fb;
    }
    if roots.len() < count {
        return Err(Error::Bracketing {
            lo,
            hi,
            found: roots.len(),
            wanted: count,
        });
    }
    Ok(roots
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            // use the endpoint where Y is larger to avoid dividing by a near zero
            let (yb, ya) = (bessel_y(alpha, r_max * x).unwrap_or(0.0), bessel_y(alpha, r_min * x).unwrap_or(0.0));
            let c = if yb.abs() >= ya.abs() {
                -bessel_j(alpha, r_max * x) / yb
            } else {
                -bessel_j(alpha, r_min * x) / ya
            };
            AnnulusEigenpair {
                alpha,
                beta: i as u32 + 1,
                lambda: x * x,
                c,
            }
        })
        .collect())
}

/// Fraction of the expected zero spacing used as scan step.
const PI_OVER_SCAN: f64 = 1.0 / 16.0;

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= 1e-14 * m {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// Sample an eigenfunction at the circumcenters and normalize it.
/// `sigma = 1` selects `cos(αθ)`, `sigma = 2` selects `sin(αθ)` (`α > 0`).
pub fn annulus_eigenfunction_field(mesh: &RingMesh, pair: &AnnulusEigenpair, sigma: u8) -> Result<Field> {
    let angular: fn(f64) -> f64 = match (sigma, pair.alpha) {
        (1, _) => f64::cos,
        (2, a) if a > 0 => f64::sin,
        (2, _) => return Err(Error::param("sigma", "sigma = 2 needs alpha > 0")),
        _ => return Err(Error::param("sigma", format!("must be 1 or 2, got {sigma}"))),
    };
    let alpha = pair.alpha as f64;
    let mut u = Field::from_fn(mesh, |_, x| {
        Complex64::new(pair.radial(x.norm()) * angular(alpha * x.angle()), 0.0)
    });
    field::normalize(mesh, &mut u)?;
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshParams;

    #[test]
    fn eigenfunctions_vanish_on_both_circles() {
        for alpha in 0..4 {
            let pairs = annulus_eigenpairs(alpha, 3, 0.6, 1.4).unwrap();
            assert!(pairs.windows(2).all(|w| w[1].lambda > w[0].lambda));
            for p in &pairs {
                let scale = (0..50)
                    .map(|i| p.radial(0.6 + 0.8 * i as f64 / 49.0).abs())
                    .fold(0.0, f64::max);
                assert!(p.radial(0.6).abs() < 1e-9 * scale);
                assert!(p.radial(1.4).abs() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn ground_radial_mode_matches_finite_differences() {
        // independent oracle: inverse power iteration on the flux-form
        // discretization of -(r u')' / r with n = 2000
        let n = 2000;
        let (a, b) = (0.6, 1.4);
        let h = (b - a) / n as f64;
        let r = |k: f64| a + k * h;
        let dim = n - 1;
        let diag: Vec<f64> = (1..n).map(|k| (r(k as f64 + 0.5) + r(k as f64 - 0.5)) / (h * h * r(k as f64))).collect();
        let lower: Vec<f64> = (2..n).map(|k| -r(k as f64 - 0.5) / (h * h * r(k as f64))).collect();
        let upper: Vec<f64> = (1..n - 1).map(|k| -r(k as f64 + 0.5) / (h * h * r(k as f64))).collect();
        let solve = |rhs: &[f64]| -> Vec<f64> {
            let mut c = vec![0.0; dim];
            let mut d = vec![0.0; dim];
            c[0] = upper[0] / diag[0];
            d[0] = rhs[0] / diag[0];
            for i in 1..dim {
                let m = diag[i] - lower[i - 1] * c[i - 1];
                if i < dim - 1 {
                    c[i] = upper[i] / m;
                }
                d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / m;
            }
            let mut x = d.clone();
            for i in (0..dim - 1).rev() {
                x[i] = d[i] - c[i] * x[i + 1];
            }
            x
        };
        let mut v = vec![1.0; dim];
        let mut mu = 0.0;
        for _ in 0..200 {
            let w = solve(&v);
            let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            mu = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / v.iter().map(|x| x * x).sum::<f64>();
            v = w.iter().map(|x| x / nw).collect();
        }
        let fd = 1.0 / mu;
        let exact = annulus_eigenpairs(0, 1, a, b).unwrap()[0].lambda;
        assert!((fd - exact).abs() / exact < 1e-3, "{fd} vs {exact}");
    }

    #[test]
    fn eigenfunction_fields() {
        let mesh = RingMesh::build(&MeshParams::new(0.6, 1.4, 0.1)).unwrap();
        let pair = annulus_eigenpairs(0, 1, 0.6, 1.4).unwrap()[0];
        let u = annulus_eigenfunction_field(&mesh, &pair, 1).unwrap();
        let perm = mesh.rotation_permutation(1).unwrap();
        for (k, &p) in perm.iter().enumerate() {
            assert!((u.values[k] - u.values[p]).norm() < 1e-12);
        }
        // no sign change in the ground radial mode
        let sign = u.values[0].re.signum();
        assert!(u.values.iter().all(|z| z.re * sign > 0.0));
        assert!(annulus_eigenfunction_field(&mesh, &pair, 2).is_err());
        let p2 = annulus_eigenpairs(2, 1, 0.6, 1.4).unwrap()[0];
        assert!(annulus_eigenfunction_field(&mesh, &p2, 2).is_ok());
    }
}
