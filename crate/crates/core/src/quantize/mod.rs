//! Weyl operators on the truncated Fourier basis `{e_k : |k|_∞ ≤ N}`.
//!
//! Fourier-multiplier structure makes every operator built here banded:
//! `⟨e_j, Op(a) e_k⟩` vanishes once `|j − k|_∞` exceeds the angle band of
//! `a`. [`TorusOperator`] therefore stores each row by offset `j − k` in a
//! box of half-width `band`; a band of `2N` is a full dense matrix.
//!
//! Only the interior block `|k|_∞ ≤ N − margin` of a product of truncated
//! operators agrees with the infinite-dimensional product, so every check
//! in this crate reads interior blocks.

mod spectrum;
mod weyl;

pub use spectrum::{
    eigenvalues, exp_hermitian, operator_norm, spectrum, window_spectrum, Spectrum, WindowEigen,
};
pub use weyl::{transport_matrix, weyl_matrix};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Index, Result, MAX_DIM};

/// Largest block handled by dense SVD in the norm routines; bigger blocks
/// use power iteration.
pub const DENSE_NORM_LIMIT: usize = 600;

const POWER_MAX_ITER: usize = 500;
const POWER_TOL: f64 = 1e-10;
/// Squared norms below this are round-off; iterating further buys nothing.
const POWER_FLOOR: f64 = 1e-26;

/// Index box `|k|_∞ ≤ n` in `Z^d`, ordered with the last axis fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TorusBasis {
    dim: usize,
    n: usize,
}

impl TorusBasis {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidParameter(format!("basis dimension {dim} outside 1..={MAX_DIM}")));
        }
        if n == 0 || n > 4096 {
            return Err(Error::InvalidParameter(format!("truncation N = {n} outside 1..=4096")));
        }
        Ok(TorusBasis { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn side(&self) -> usize {
        2 * self.n + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, k: &[i32]) -> Option<usize> {
        let n = self.n as i64;
        let mut i = 0usize;
        for &c in &k[..self.dim] {
            let c = i64::from(c);
            if c.abs() > n {
                return None;
            }
            i = i * self.side() + (c + n) as usize;
        }
        Some(i)
    }

    pub fn k(&self, mut i: usize) -> Index {
        let mut k = [0; MAX_DIM];
        for axis in (0..self.dim).rev() {
            k[axis] = (i % self.side()) as i32 - self.n as i32;
            i /= self.side();
        }
        k
    }

    /// Indices with `|k|_∞ ≤ n − margin`.
    pub fn interior(&self, margin: usize) -> Vec<usize> {
        if margin > self.n {
            return Vec::new();
        }
        let lim = (self.n - margin) as i32;
        (0..self.len()).filter(|&i| self.k(i)[..self.dim].iter().all(|c| c.abs() <= lim)).collect()
    }
}

/// A truncated operator on `span{e_k}`, stored by diagonals.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusOperator {
    basis: TorusBasis,
    hbar: f64,
    band: usize,
    data: Vec<Complex64>,
}

impl TorusOperator {
    /// Zero operator able to hold offsets `|j − k|_∞ ≤ band` (capped at `2N`).
    pub fn zeros(basis: TorusBasis, hbar: f64, band: usize) -> Self {
        let band = band.min(2 * basis.n);
        let width = (2 * band + 1).pow(basis.dim as u32);
        TorusOperator { basis, hbar, band, data: vec![Complex64::default(); basis.len() * width] }
    }

    pub fn identity(basis: TorusBasis, hbar: f64) -> Self {
        Self::diagonal(basis, hbar, |_| Complex64::new(1.0, 0.0))
    }

    pub fn diagonal<F: Fn(&Index) -> Complex64>(basis: TorusBasis, hbar: f64, f: F) -> Self {
        let mut op = Self::zeros(basis, hbar, 0);
        for i in 0..basis.len() {
            op.data[i] = f(&basis.k(i));
        }
        op
    }

    /// Copies a dense matrix, keeping the full band `2N`.
    pub fn from_dense(basis: TorusBasis, hbar: f64, m: &DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != basis.len() || m.ncols() != basis.len() {
            return Err(Error::InvalidParameter(format!(
                "{}×{} matrix on a basis of size {}",
                m.nrows(),
                m.ncols(),
                basis.len()
            )));
        }
        let mut op = Self::zeros(basis, hbar, 2 * basis.n);
        for r in 0..basis.len() {
            for c in 0..basis.len() {
                let z = m[(r, c)];
                if z != Complex64::default() {
                    *op.entry_mut(r, c) = z;
                }
            }
        }
        Ok(op)
    }

    pub fn basis(&self) -> TorusBasis {
        self.basis
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn band(&self) -> usize {
        self.band
    }

    /// Matrix size `(2N+1)^d`.
    pub fn size(&self) -> usize {
        self.basis.len()
    }

    fn width(&self) -> usize {
        (2 * self.band + 1).pow(self.basis.dim as u32)
    }

    fn offset_slot(&self, delta: &Index) -> Option<usize> {
        let b = self.band as i32;
        let mut s = 0usize;
        for &c in &delta[..self.basis.dim] {
            if c.abs() > b {
                return None;
            }
            s = s * (2 * self.band + 1) + (c + b) as usize;
        }
        Some(s)
    }

    fn offset(&self, mut slot: usize) -> Index {
        let side = 2 * self.band + 1;
        let mut d = [0; MAX_DIM];
        for axis in (0..self.basis.dim).rev() {
            d[axis] = (slot % side) as i32 - self.band as i32;
            slot /= side;
        }
        d
    }

    fn delta(&self, row: usize, col: usize) -> Index {
        let (j, k) = (self.basis.k(row), self.basis.k(col));
        let mut d = [0; MAX_DIM];
        for i in 0..self.basis.dim {
            d[i] = j[i] - k[i];
        }
        d
    }

    /// Entry `⟨e_{k(row)}, M e_{k(col)}⟩`.
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        match self.offset_slot(&self.delta(row, col)) {
            Some(s) => self.data[row * self.width() + s],
            None => Complex64::default(),
        }
    }

    /// Mutable entry; panics outside the stored band.
    pub(crate) fn entry_mut(&mut self, row: usize, col: usize) -> &mut Complex64 {
        let s = self.offset_slot(&self.delta(row, col)).expect("entry outside the stored band");
        let w = self.width();
        &mut self.data[row * w + s]
    }

    /// Calls `f(col, value)` for every stored entry of `row` inside the box.
    fn for_row<F: FnMut(usize, Complex64)>(&self, row: usize, f: F) {
        self.for_row_with(&self.offsets(), row, f)
    }

    /// All offsets `j − k`, in slot order.
    fn offsets(&self) -> Vec<Index> {
        (0..self.width()).map(|s| self.offset(s)).collect()
    }

    fn for_row_with<F: FnMut(usize, Complex64)>(&self, offsets: &[Index], row: usize, mut f: F) {
        let w = offsets.len();
        let j = self.basis.k(row);
        let n = self.basis.n as i32;
        let side = 2 * self.basis.n + 1;
        let d = self.basis.dim;
        'slots: for (s, delta) in offsets.iter().enumerate() {
            let v = self.data[row * w + s];
            if v == Complex64::default() {
                continue;
            }
            let mut col = 0usize;
            for i in 0..d {
                let c = j[i] - delta[i];
                if c.abs() > n {
                    continue 'slots;
                }
                col = col * side + (c + n) as usize;
            }
            f(col, v);
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.size());
        let offsets = self.offsets();
        (0..self.size())
            .map(|r| {
                let mut acc = Complex64::default();
                self.for_row_with(&offsets, r, |c, v| acc += v * x[c]);
                acc
            })
            .collect()
    }

    /// `M* x`.
    pub fn adjoint_matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.size());
        let offsets = self.offsets();
        let mut y = vec![Complex64::default(); self.size()];
        for (r, xr) in x.iter().enumerate() {
            if *xr == Complex64::default() {
                continue;
            }
            self.for_row_with(&offsets, r, |c, v| y[c] += v.conj() * xr);
        }
        y
    }

    pub fn adjoint(&self) -> TorusOperator {
        let mut out = Self::zeros(self.basis, self.hbar, self.band);
        for r in 0..self.size() {
            self.for_row(r, |c, v| *out.entry_mut(c, r) = v.conj());
        }
        out
    }

    fn check_compatible(&self, other: &TorusOperator) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::InvalidParameter(format!(
                "operators on different bases: {:?} vs {:?}",
                self.basis, other.basis
            )));
        }
        Ok(())
    }

    /// Matrix product on the truncated basis.
    pub fn mul(&self, other: &TorusOperator) -> Result<TorusOperator> {
        self.check_compatible(other)?;
        let mut out = Self::zeros(self.basis, self.hbar, self.band + other.band);
        let w = out.width();
        let (left, right) = (self.offsets(), other.offsets());
        for r in 0..self.size() {
            let jr = self.basis.k(r);
            self.for_row_with(&left, r, |m, a| {
                other.for_row_with(&right, m, |c, b| {
                    let mut d = [0; MAX_DIM];
                    let kc = self.basis.k(c);
                    for i in 0..self.basis.dim {
                        d[i] = jr[i] - kc[i];
                    }
                    let s = out.offset_slot(&d).expect("product offset within the summed band");
                    out.data[r * w + s] += a * b;
                });
            });
        }
        Ok(out)
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: Complex64, other: &TorusOperator) -> Result<TorusOperator> {
        self.check_compatible(other)?;
        let mut out = Self::zeros(self.basis, self.hbar, self.band.max(other.band));
        for r in 0..self.size() {
            self.for_row(r, |col, v| *out.entry_mut(r, col) += v);
            other.for_row(r, |col, v| *out.entry_mut(r, col) += c * v);
        }
        Ok(out)
    }

    pub fn add(&self, other: &TorusOperator) -> Result<TorusOperator> {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &TorusOperator) -> Result<TorusOperator> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    pub fn scale(&self, c: Complex64) -> TorusOperator {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= c;
        }
        out
    }

    /// `max |M_{rc} − conj M_{cr}|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for r in 0..self.size() {
            self.for_row(r, |c, v| defect = defect.max((v - self.get(c, r).conj()).norm()));
        }
        defect
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Drops entries with `|M_{rc}| < threshold` and shrinks the band to
    /// the widest surviving offset.
    pub fn pruned(&self, threshold: f64) -> TorusOperator {
        let mut band = 0usize;
        for r in 0..self.size() {
            self.for_row(r, |c, v| {
                if v.norm() >= threshold {
                    let d = self.delta(r, c);
                    band = band.max(d[..self.basis.dim].iter().map(|x| x.unsigned_abs() as usize).max().unwrap_or(0));
                }
            });
        }
        let mut out = Self::zeros(self.basis, self.hbar, band);
        for r in 0..self.size() {
            self.for_row(r, |c, v| {
                if v.norm() >= threshold {
                    *out.entry_mut(r, c) = v;
                }
            });
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            self.for_row(r, |c, v| m[(r, c)] = v);
        }
        m
    }

    /// Dense copy of the block `rows × cols`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<Complex64> {
        let mut pos = vec![usize::MAX; self.size()];
        for (i, &c) in cols.iter().enumerate() {
            pos[c] = i;
        }
        let mut m = DMatrix::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            self.for_row(r, |c, v| {
                if pos[c] != usize::MAX {
                    m[(i, pos[c])] = v;
                }
            });
        }
        m
    }

    /// Spectral norm of the block `rows × cols`.
    pub fn block_norm(&self, rows: &[usize], cols: &[usize]) -> Result<f64> {
        if rows.is_empty() || cols.is_empty() {
            return Ok(0.0);
        }
        if rows.len().max(cols.len()) <= DENSE_NORM_LIMIT {
            return dense_norm(&self.block(rows, cols));
        }
        let n = self.size();
        let apply = |x: &[Complex64]| {
            let mut full = vec![Complex64::default(); n];
            for (i, &c) in cols.iter().enumerate() {
                full[c] = x[i];
            }
            let y = self.matvec(&full);
            let mut mid = vec![Complex64::default(); n];
            for &r in rows {
                mid[r] = y[r];
            }
            let z = self.adjoint_matvec(&mid);
            cols.iter().map(|&c| z[c]).collect::<Vec<_>>()
        };
        Ok(power_iteration(cols.len(), apply).sqrt())
    }

    /// Spectral norm of the interior block `|k|_∞ ≤ N − margin`.
    pub fn interior_norm(&self, margin: usize) -> Result<f64> {
        let idx = self.basis.interior(margin);
        self.block_norm(&idx, &idx)
    }
}

/// Spectral norm of `P A P`, `P` the projector on the interior block, for an
/// operator given only through `A` and `A*` (used when forming the product
/// explicitly would be too expensive).
pub fn interior_map_norm<F, G>(basis: TorusBasis, margin: usize, apply: F, adjoint: G) -> f64
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
    G: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let idx = basis.interior(margin);
    if idx.is_empty() {
        return 0.0;
    }
    let n = basis.len();
    let project = |y: Vec<Complex64>| {
        let mut out = vec![Complex64::default(); n];
        for &i in &idx {
            out[i] = y[i];
        }
        out
    };
    let gram = |x: &[Complex64]| {
        let mut full = vec![Complex64::default(); n];
        for (i, &r) in idx.iter().enumerate() {
            full[r] = x[i];
        }
        let z = adjoint(&project(apply(&full)));
        idx.iter().map(|&r| z[r]).collect::<Vec<_>>()
    };
    power_iteration(idx.len(), gram).sqrt()
}

fn dense_norm(m: &DMatrix<Complex64>) -> Result<f64> {
    let svd = nalgebra::linalg::SVD::try_new(m.clone(), false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenFailure("SVD did not converge".into()))?;
    Ok(svd.singular_values.iter().copied().fold(0.0, f64::max))
}

/// Largest eigenvalue of a positive semidefinite map given by `apply`.
pub(crate) fn power_iteration<F>(n: usize, apply: F) -> f64
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    // Deterministic start with energy on every coordinate.
    let mut x: Vec<Complex64> =
        (0..n).map(|i| Complex64::new(1.0 + 0.5 * ((i * 7919) % 13) as f64 / 13.0, 0.3 * ((i * 104_729) % 7) as f64)).collect();
    normalize(&mut x);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let mut y = apply(&x);
        let next = norm2(&y);
        if next == 0.0 {
            return 0.0;
        }
        for v in y.iter_mut() {
            *v /= next;
        }
        x = y;
        let converged = (next - lambda).abs() <= POWER_TOL * next || next < POWER_FLOOR;
        lambda = next;
        if converged {
            break;
        }
    }
    lambda
}

pub(crate) fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn normalize(x: &mut [Complex64]) {
    let n = norm2(x);
    if n > 0.0 {
        for v in x.iter_mut() {
            *v /= n;
        }
    }
}
