//! Bessel functions of integer order.
//!
//! `J_n` comes from Miller's backward recurrence normalized by
//! `J_0 + 2 Σ J_{2k} = 1`, and `Y_0`, `Y_1` from the Neumann series in the
//! `J_{2k}`. Beyond [`ASYMPTOTIC_FROM`] the Hankel expansion is used for
//! orders 0 and 1, followed by recurrence.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Switch point between the recurrence and the asymptotic expansion.
pub const ASYMPTOTIC_FROM: f64 = 25.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `J_0(x), ..., J_{top}(x)` by backward recurrence (`x > 0`).
fn miller(top: usize, x: f64) -> Vec<f64> {
    let start = {
        let s = top.max(x as usize) as f64;
        let m = (s + 30.0 + (50.0 * s).sqrt()) as usize;
        m + (m % 2)
    };
    let mut values = vec![0.0; start + 2];
    let mut next = 0.0;
    let mut cur = 1e-300;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        values[k - 1] = cur;
        if k - 1 > 0 && (k - 1) % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            // rescale to keep the recurrence in range
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            for v in values.iter_mut().take(start + 1).skip(k - 1) {
                *v *= s;
            }
        }
    }
    norm += values[0];
    values.truncate(top.max(1) + 1);
    for v in &mut values {
        *v /= norm;
    }
    values
}

/// Terms of the Hankel expansion `(P, Q)` for order `nu`.
fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p: f64 = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        term *= (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if term.abs() >= last || term.abs() < 1e-17 * p.abs() {
            break;
        }
        last = term.abs();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * term;
        } else {
            p += sign * term;
        }
    }
    (p, q)
}

fn hankel(nu: u32, x: f64) -> (f64, f64) {
    let (p, q) = hankel_pq(nu as f64, x);
    let chi = x - (nu as f64 * 0.5 + 0.25) * PI;
    let amp = (2.0 / (PI * x)).sqrt();
    let (s, c) = chi.sin_cos();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// `J_n(x)` by backward recurrence for any `x > 0`.
pub fn bessel_j_recurrence(n: u32, x: f64) -> f64 {
    miller(n as usize, x)[n as usize]
}

/// `(Y_0(x), Y_1(x))` from the Neumann series, valid for moderate `x > 0`.
pub fn bessel_y01_series(x: f64) -> (f64, f64) {
    let top = (x as usize + 40 + (50.0 * x).sqrt() as usize) | 1;
    let j = miller(top + 1, x);
    let log_term = (x / 2.0).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k + 1 < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = 2.0 / PI * log_term * j[0] - 4.0 / PI * s0;
    // Y_1 = -Y_0'
    let y1 = -2.0 / PI * j[0] / x + 2.0 / PI * log_term * j[1] + 2.0 / PI * s1;
    (y0, y1)
}

/// Bessel function of the first kind.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n.is_multiple_of(2) { v } else { -v };
    }
    if x < ASYMPTOTIC_FROM || n as f64 >= x {
        return bessel_j_recurrence(n, x);
    }
    let (j0, _) = hankel(0, x);
    if n == 0 {
        return j0;
    }
    let (j1, _) = hankel(1, x);
    let (mut a, mut b) = (j0, j1);
    for k in 1..n {
        let c = 2.0 * k as f64 / x * b - a;
        a = b;
        b = c;
    }
    b
}

/// Bessel function of the second kind, `x > 0`.
pub fn bessel_y(n: u32, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::param("x", format!("Y_n needs a positive argument, got {x}")));
    }
    let (y0, y1) = if x < ASYMPTOTIC_FROM {
        bessel_y01_series(x)
    } else {
        (hankel(0, x).1, hankel(1, x).1)
    };
    if n == 0 {
        return Ok(y0);
    }
    let (mut a, mut b) = (y0, y1);
    for k in 1..n {
        let c = 2.0 * k as f64 / x * b - a;
        a = b;
        b = c;
    }
    Ok(b)
}

/// `J_{n+1} Y_n - J_n Y_{n+1} - 2/(πx)`, zero up to rounding.
pub fn wronskian_defect(n: u32, x: f64) -> Result<f64> {
    let w = bessel_j(n + 1, x) * bessel_y(n, x)? - bessel_j(n, x) * bessel_y(n + 1, x)?;
    Ok(w - 2.0 / (PI * x))
}
