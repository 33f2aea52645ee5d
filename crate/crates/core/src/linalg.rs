//! Sparse storage and a direct solver for the symmetric systems arising from
//! the finite-volume operator.
//!
//! Every system solved here has the form `(diag(d) + s·A) x = b` with `A` real
//! symmetric and `d`, `s` real or complex. The matrix is reordered by reverse
//! Cuthill-McKee and factored as `L D Lᵀ` (transpose, not adjoint) in envelope
//! storage. No pivoting is performed; callers only factor matrices whose
//! Hermitian part is definite, or check the residual.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Field element usable in the solver: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn scale(self, s: f64) -> Self;
    fn abs_sq(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn abs_sq(self) -> f64 {
        self * self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn abs_sq(self) -> f64 {
        self.norm_sqr()
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
}

pub fn norm2<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.abs_sq()).sum::<f64>().sqrt()
}

/// Real sparse matrix in compressed-row form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assemble from `(row, col, value)` triplets; duplicates are summed in
    /// input order, so the result is reproducible bit for bit.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> CsrMatrix {
        let mut sorted: Vec<(usize, usize, usize)> = triplets
            .iter()
            .enumerate()
            .map(|(i, &(r, c, _))| (r, c, i))
            .collect();
        sorted.sort_unstable();
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, i) in sorted {
            assert!(r < n && c < n, "triplet ({r}, {c}) out of range for n = {n}");
            let v = triplets[i].2;
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn apply<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into<T: Scalar>(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.col_idx[k]].scale(self.values[k]);
            }
            *out = acc;
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.triplets().all(|(r, c, v)| (v - self.get(c, r)).abs() <= tol * v.abs().max(1.0))
    }

    /// Reverse Cuthill-McKee ordering of the sparsity graph.
    pub fn rcm_ordering(&self) -> Vec<usize> {
        let n = self.n;
        let degree: Vec<usize> = (0..n)
            .map(|r| self.row(r).filter(|&(c, _)| c != r).count())
            .collect();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let seed = (0..n)
                .filter(|&v| !visited[v])
                .min_by_key(|&v| degree[v])
                .expect("unvisited vertex exists");
            let start = self.pseudo_peripheral(seed, &degree);
            visited[start] = true;
            let mut head = order.len();
            order.push(start);
            while head < order.len() {
                let v = order[head];
                head += 1;
                let mut next: Vec<usize> = self
                    .row(v)
                    .map(|(c, _)| c)
                    .filter(|&c| !visited[c])
                    .collect();
                next.sort_by_key(|&c| (degree[c], c));
                for c in next {
                    visited[c] = true;
                    order.push(c);
                }
            }
        }
        order.reverse();
        order
    }

    fn bfs_levels(&self, start: usize) -> (Vec<usize>, usize) {
        let mut level = vec![usize::MAX; self.n];
        level[start] = 0;
        let mut queue = std::collections::VecDeque::from([start]);
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            last = v;
            for (c, _) in self.row(v) {
                if level[c] == usize::MAX {
                    level[c] = level[v] + 1;
                    queue.push_back(c);
                }
            }
        }
        let depth = level[last];
        (level, depth)
    }

    fn pseudo_peripheral(&self, seed: usize, degree: &[usize]) -> usize {
        let mut current = seed;
        let (mut level, mut depth) = self.bfs_levels(current);
        loop {
            let candidate = (0..self.n)
                .filter(|&v| level[v] == depth)
                .min_by_key(|&v| degree[v])
                .unwrap_or(current);
            let (cand_level, cand_depth) = self.bfs_levels(candidate);
            if cand_depth <= depth {
                return current;
            }
            current = candidate;
            level = cand_level;
            depth = cand_depth;
        }
    }
}

/// Fill pattern of the envelope factorization under a fixed ordering.
#[derive(Debug, Clone)]
pub struct EnvelopePattern {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// `inv[old] = new`.
    inv: Vec<usize>,
    /// First stored column of each reordered row.
    first: Vec<usize>,
    /// Offsets of each row inside the packed storage.
    offsets: Vec<usize>,
}

impl EnvelopePattern {
    pub fn for_matrix(a: &CsrMatrix) -> EnvelopePattern {
        let perm = a.rcm_ordering();
        let n = a.dim();
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(perm[i]).map(|(c, _)| inv[c]).fold(i, usize::min))
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + i - first[i] + 1);
        }
        EnvelopePattern {
            perm,
            inv,
            first,
            offsets,
        }
    }

    pub fn envelope_size(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }
}

/// `L D Lᵀ` factors of `diag(d) + s·A`.
#[derive(Debug, Clone)]
pub struct EnvelopeLdlt<T: Scalar> {
    pattern: Arc<EnvelopePattern>,
    /// Strictly lower entries of `L` per row, followed by `D_ii`.
    data: Vec<T>,
}

impl<T: Scalar> EnvelopeLdlt<T> {
    /// Factor `diag(diag) + scale·a` where `a` has the sparsity of `pattern`.
    pub fn factor(
        pattern: Arc<EnvelopePattern>,
        a: &CsrMatrix,
        diag: &[T],
        scale: T,
    ) -> Result<EnvelopeLdlt<T>> {
        let n = pattern.dim();
        assert_eq!(a.dim(), n);
        assert_eq!(diag.len(), n);
        let mut data = vec![T::zero(); pattern.envelope_size()];
        for i in 0..n {
            let old = pattern.perm[i];
            let (fi, off) = (pattern.first[i], pattern.offsets[i]);
            for (c, v) in a.row(old) {
                let j = pattern.inv[c];
                if j <= i {
                    data[off + j - fi] += scale.scale(v);
                }
            }
            data[off + i - fi] += diag[old];
        }

        for i in 0..n {
            let (fi, off) = (pattern.first[i], pattern.offsets[i]);
            let (prev, cur) = data.split_at_mut(off);
            let row = &mut cur[..i - fi + 1];
            // row[j - fi] <- w_j = (L D)_{ij} for fi <= j < i
            for j in fi..i {
                let fj = pattern.first[j];
                let start = fi.max(fj);
                let lj = &prev[pattern.offsets[j]..pattern.offsets[j] + j - fj];
                let mut acc = T::zero();
                for k in start..j {
                    acc += row[k - fi] * lj[k - fj];
                }
                row[j - fi] -= acc;
            }
            let mut dsum = T::zero();
            for j in fi..i {
                let dj = prev[pattern.offsets[j + 1] - 1];
                let w = row[j - fi];
                let l = w / dj;
                dsum += w * l;
                row[j - fi] = l;
            }
            let d = row[i - fi] - dsum;
            if d.abs_sq() == 0.0 || !d.is_finite() {
                return Err(Error::ZeroPivot { row: i });
            }
            row[i - fi] = d;
        }
        Ok(EnvelopeLdlt { pattern, data })
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let p = &*self.pattern;
        let n = p.dim();
        assert_eq!(rhs.len(), n);
        let mut y: Vec<T> = p.perm.iter().map(|&old| rhs[old]).collect();
        for i in 0..n {
            let (fi, off) = (p.first[i], p.offsets[i]);
            let row = &self.data[off..off + i - fi];
            let mut acc = T::zero();
            for (l, yj) in row.iter().zip(&y[fi..i]) {
                acc += *l * *yj;
            }
            y[i] -= acc;
        }
        for i in 0..n {
            y[i] = y[i] / self.data[p.offsets[i + 1] - 1];
        }
        for i in (0..n).rev() {
            let (fi, off) = (p.first[i], p.offsets[i]);
            let xi = y[i];
            let row = &self.data[off..off + i - fi];
            for (l, yj) in row.iter().zip(&mut y[fi..i]) {
                *yj -= *l * xi;
            }
        }
        let mut out = vec![T::zero(); n];
        for (new, &old) in p.perm.iter().enumerate() {
            out[old] = y[new];
        }
        out
    }
}

/// Solver for `(diag(d) + s·A) x = b` with residual control.
#[derive(Debug, Clone)]
pub struct ShiftedSystem<'a, T: Scalar> {
    a: &'a CsrMatrix,
    diag: Vec<T>,
    scale: T,
    factors: EnvelopeLdlt<T>,
}

/// Relative residual required of every linear solve.
pub const SOLVE_TOL: f64 = 1e-10;

impl<'a, T: Scalar> ShiftedSystem<'a, T> {
    pub fn new(
        pattern: Arc<EnvelopePattern>,
        a: &'a CsrMatrix,
        diag: Vec<T>,
        scale: T,
    ) -> Result<Self> {
        let factors = EnvelopeLdlt::factor(pattern, a, &diag, scale)?;
        Ok(ShiftedSystem {
            a,
            diag,
            scale,
            factors,
        })
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = self.a.apply(x);
        for ((yi, di), xi) in y.iter_mut().zip(&self.diag).zip(x) {
            *yi = self.scale * *yi + *di * *xi;
        }
        y
    }

    /// Solve and return the solution with its relative residual, applying up
    /// to two steps of iterative refinement.
    pub fn solve(&self, rhs: &[T]) -> Result<(Vec<T>, f64)> {
        let bnorm = norm2(rhs);
        let mut x = self.factors.solve(rhs);
        if bnorm == 0.0 {
            return Ok((x, 0.0));
        }
        let mut rel = f64::INFINITY;
        for _ in 0..3 {
            let ax = self.apply(&x);
            let r: Vec<T> = rhs.iter().zip(&ax).map(|(b, y)| *b - *y).collect();
            rel = norm2(&r) / bnorm;
            if rel <= SOLVE_TOL || !rel.is_finite() {
                break;
            }
            let dx = self.factors.solve(&r);
            for (xi, di) in x.iter_mut().zip(dx) {
                *xi += di;
            }
        }
        if !(rel <= SOLVE_TOL) {
            return Err(Error::SolverFailure {
                residual: rel,
                tolerance: SOLVE_TOL,
            });
        }
        Ok((x, rel))
    }
}
