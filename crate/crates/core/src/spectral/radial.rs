//! Finite-difference discretization of the radial operator
//! `-(1/2m)(φ'' + φ'/r - ℓ²φ/r²) - V0 exp(-2m(r-1)²) φ` with Dirichlet
//! conditions, and its lowest eigenpairs.
//!
//! The boundary points are eliminated, leaving a tridiagonal matrix on the
//! `n - 1` interior points. It is made symmetric by an exact diagonal
//! similarity, solved by Sturm bisection and inverse iteration, and the
//! residual is checked against the original matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialParams {
    pub r_min: f64,
    pub r_max: f64,
    pub m: f64,
    pub v0: f64,
}

impl RadialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0) || !(self.r_max > self.r_min) {
            return Err(Error::param("r_max", "need 0 < r_min < r_max"));
        }
        if !(self.m > 0.0) {
            return Err(Error::param("m", "must be positive"));
        }
        Ok(())
    }
}

/// Tridiagonal matrix: `lower[i]` multiplies `x[i]` in row `i + 1`, `upper[i]`
/// multiplies `x[i + 1]` in row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    /// Interior grid radii.
    pub r: Vec<f64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.upper[i] * x[i + 1];
                }
                y
            })
            .collect()
    }
}

pub fn assemble_radial_operator(ell: i32, n: usize, params: &RadialParams) -> Result<Tridiagonal> {
    params.validate()?;
    if n < 2 {
        return Err(Error::param("n", format!("must be >= 2, got {n}")));
    }
    let h = (params.r_max - params.r_min) / n as f64;
    let r: Vec<f64> = (1..n).map(|k| params.r_min + (params.r_max - params.r_min) * k as f64 / n as f64).collect();
    let s = 1.0 / (2.0 * params.m);
    let l2 = (ell as f64).powi(2);
    let diag = r
        .iter()
        .map(|&rk| s * (2.0 / (h * h) + l2 / (rk * rk)) - params.v0 * (-2.0 * params.m * (rk - 1.0).powi(2)).exp())
        .collect();
    let upper = r[..r.len() - 1].iter().map(|&rk| -s * (1.0 / (h * h) + 1.0 / (2.0 * h * rk))).collect();
    let lower = r[1..].iter().map(|&rk| -s * (1.0 / (h * h) - 1.0 / (2.0 * h * rk))).collect();
    Ok(Tridiagonal { lower, diag, upper, r })
}

/// Radial eigenpairs of one azimuthal order.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialModes {
    pub ell: i32,
    /// Full grid `r_0 = r_min, ..., r_n = r_max`.
    pub grid: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors on the full grid (zero at both ends), unit Euclidean
    /// norm, largest entry positive.
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

/// Required `‖Hφ - λφ‖` of every returned pair.
pub const RADIAL_RESIDUAL_TOL: f64 = 1e-8;

/// Number of eigenvalues of the symmetric tridiagonal `(d, e)` below `x`.
fn sturm_count(d: &[f64], e2: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e2[i - 1] / q };
        q = d[i] - x - off;
        if q == 0.0 {
            q = -f64::EPSILON * (d[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solve `(T - μ) x = b` for symmetric tridiagonal `T` by Gaussian
/// elimination with partial pivoting.
fn shifted_solve(d: &[f64], e: &[f64], mu: f64, b: &[f64]) -> Vec<f64> {
    let n = d.len();
    // rows stored as (a0, a1, a2) for columns (i, i+1, i+2)
    let mut rows: Vec<[f64; 3]> = (0..n)
        .map(|i| [d[i] - mu, if i + 1 < n { e[i] } else { 0.0 }, 0.0])
        .collect();
    let mut sub: Vec<f64> = (0..n).map(|i| if i > 0 { e[i - 1] } else { 0.0 }).collect();
    let mut rhs = b.to_vec();
    for i in 0..n.saturating_sub(1) {
        // candidate pivot rows: i (entry rows[i][0]) and i+1 (entry sub[i+1])
        if sub[i + 1].abs() > rows[i][0].abs() {
            let below = [sub[i + 1], rows[i + 1][0], rows[i + 1][1]];
            let here = rows[i];
            rows[i] = below;
            sub[i + 1] = here[0];
            rows[i + 1] = [here[1], here[2], 0.0];
            rhs.swap(i, i + 1);
        } else {
            rows[i + 1] = [rows[i + 1][0], rows[i + 1][1], 0.0];
        }
        let piv = if rows[i][0] == 0.0 { f64::EPSILON } else { rows[i][0] };
        rows[i][0] = piv;
        let f = sub[i + 1] / piv;
        rows[i + 1][0] -= f * rows[i][1];
        rows[i + 1][1] -= f * rows[i][2];
        rhs[i + 1] -= f * rhs[i];
    }
    if rows[n - 1][0] == 0.0 {
        rows[n - 1][0] = f64::EPSILON;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= rows[i][1] * x[i + 1];
        }
        if i + 2 < n {
            s -= rows[i][2] * x[i + 2];
        }
        x[i] = s / rows[i][0];
    }
    x
}

/// Lowest `p_max + 1` eigenpairs of the radial operator.
pub fn radial_modes(ell: i32, p_max: usize, n: usize, params: &RadialParams) -> Result<RadialModes> {
    let h = assemble_radial_operator(ell, n, params)?;
    let dim = h.dim();
    if p_max + 1 > dim {
        return Err(Error::param("p_max", format!("need p_max + 1 <= n - 1 = {dim}")));
    }
    // D^{-1} H D symmetric with D = diag(g): g_{i+1} / g_i = sqrt(lower_i / upper_i)
    let mut g = vec![1.0; dim];
    for i in 0..dim - 1 {
        g[i + 1] = g[i] * (h.lower[i] / h.upper[i]).sqrt();
    }
    let e: Vec<f64> = (0..dim - 1).map(|i| -(h.lower[i] * h.upper[i]).sqrt()).collect();
    let e2: Vec<f64> = e.iter().map(|x| x * x).collect();
    let d = &h.diag;

    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..dim {
        let rad = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < dim { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - rad);
        hi = hi.max(d[i] + rad);
    }
    let scale = lo.abs().max(hi.abs());

    let mut eigenvalues = Vec::with_capacity(p_max + 1);
    let mut vectors = Vec::with_capacity(p_max + 1);
    let mut residuals = Vec::with_capacity(p_max + 1);
    let mut grid = Vec::with_capacity(n + 1);
    grid.push(params.r_min);
    grid.extend_from_slice(&h.r);
    grid.push(params.r_max);

    for p in 0..=p_max {
        // bisection for the (p+1)-th smallest eigenvalue
        let (mut a, mut b) = (lo, hi);
        while b - a > 4.0 * f64::EPSILON * scale {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if sturm_count(d, &e2, mid) > p {
                b = mid;
            } else {
                a = mid;
            }
        }
        let lambda = 0.5 * (a + b);

        // inverse iteration on the symmetric form
        let mut w: Vec<f64> = (0..dim).map(|i| 1.0 + 0.01 * ((i * 7919) % 101) as f64).collect();
        for _ in 0..4 {
            let x = shifted_solve(d, &e, lambda, &w);
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            w = x.iter().map(|v| v / nx).collect();
            // orthogonalize against lower modes for close eigenvalues
            for prev in &vectors {
                let prev: &Vec<f64> = prev;
                let pw: Vec<f64> = prev[1..=dim].iter().zip(&g).map(|(v, gi)| v / gi).collect();
                let np = pw.iter().map(|v| v * v).sum::<f64>();
                let c = pw.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / np;
                for (wi, pi) in w.iter_mut().zip(&pw) {
                    *wi -= c * pi;
                }
            }
        }
        let mut phi: Vec<f64> = w.iter().zip(&g).map(|(v, gi)| v * gi).collect();
        let nphi = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let imax = (0..dim).max_by(|&i, &j| phi[i].abs().total_cmp(&phi[j].abs())).unwrap_or(0);
        let sign = if phi[imax] < 0.0 { -1.0 } else { 1.0 };
        for v in &mut phi {
            *v *= sign / nphi;
        }
        let hp = h.apply(&phi);
        let residual = hp
            .iter()
            .zip(&phi)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if !(residual <= RADIAL_RESIDUAL_TOL) {
            return Err(Error::EigenNonConvergence(format!(
                "ell = {ell}, p = {p}: residual {residual:e}"
            )));
        }
        let mut full = Vec::with_capacity(n + 1);
        full.push(0.0);
        full.extend_from_slice(&phi);
        full.push(0.0);
        eigenvalues.push(lambda);
        vectors.push(full);
        residuals.push(residual);
    }
    Ok(RadialModes {
        ell,
        grid,
        eigenvalues,
        vectors,
        residuals,
    })
}

impl RadialModes {
    /// Piecewise-linear interpolation of mode `p` at radius `r`.
    pub fn interpolate(&self, p: usize, r: f64) -> f64 {
        let grid = &self.grid;
        let n = grid.len() - 1;
        let (a, b) = (grid[0], grid[n]);
        if r <= a || r >= b {
            return 0.0;
        }
        let t = (r - a) / (b - a) * n as f64;
        let i = (t.floor() as usize).min(n - 1);
        let f = t - i as f64;
        let v = &self.vectors[p];
        v[i] * (1.0 - f) + v[i + 1] * f
    }
}

/// Number of sign changes of the interior entries.
pub fn sign_changes(v: &[f64]) -> usize {
    let peak = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mut last = 0.0;
    let mut count = 0;
    for &x in v {
        if x.abs() <= 1e-12 * peak {
            continue;
        }
        if last != 0.0 && x.signum() != last {
            count += 1;
        }
        last = x.signum();
    }
    count
}
