//! Uniform grids on `T^d` and their discrete Fourier transforms.
//!
//! Coefficients are normalized as Fourier coefficients of a trigonometric
//! polynomial: `c_k = G^{-d} Σ_g f(x_g) e^{−ik·x_g}`, so sampling
//! `Σ c_k e^{ik·x}` and transforming back returns `c_k` exactly when the grid
//! resolves every frequency.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Index, Result, MAX_DIM};

/// In-place radix-2 FFT, `X_j = Σ_n x_n e^{∓2πi jn/L}` (`−` forward).
///
/// Panics if the length is not a power of two.
pub fn fft(buf: &mut [Complex64], inverse: bool) {
    let table = twiddles(buf.len(), inverse);
    fft_with(buf, &table);
}

/// `e^{∓2πi j/L}` for `j < L/2`.
fn twiddles(n: usize, inverse: bool) -> Vec<Complex64> {
    let sign = if inverse { 1.0 } else { -1.0 };
    (0..n / 2).map(|j| Complex64::from_polar(1.0, sign * 2.0 * PI * j as f64 / n as f64)).collect()
}

fn fft_with(buf: &mut [Complex64], table: &[Complex64]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length {n} is not a power of two");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for j in 0..half {
                let u = buf[start + j];
                let v = buf[start + j + half] * table[j * stride];
                buf[start + j] = u + v;
                buf[start + j + half] = u - v;
            }
        }
        len *= 2;
    }
}

/// A `G^d` grid `x_g = 2π g / G`, stored with the last axis fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    dim: usize,
    size: usize,
}

impl Grid {
    /// Smallest power-of-two grid with at least `min_size` points per axis.
    pub fn new(dim: usize, min_size: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidParameter(format!("grid dimension {dim} outside 1..={MAX_DIM}")));
        }
        let size = min_size.max(2).next_power_of_two();
        Ok(Grid { dim, size })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.size.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.size as f64
    }

    pub fn point(&self, mut i: usize) -> [f64; MAX_DIM] {
        let mut x = [0.0; MAX_DIM];
        for axis in (0..self.dim).rev() {
            x[axis] = (i % self.size) as f64 * self.spacing();
            i /= self.size;
        }
        x
    }

    /// Signed frequency stored at slot `i` of a transformed array.
    pub fn frequency(&self, mut i: usize) -> Index {
        let mut k = [0; MAX_DIM];
        let g = self.size as i64;
        for axis in (0..self.dim).rev() {
            let c = (i % self.size) as i64;
            k[axis] = (if c >= g / 2 { c - g } else { c }) as i32;
            i /= self.size;
        }
        k
    }

    /// Slot of frequency `k`, if `|k_i| < G/2` on every axis.
    pub fn slot(&self, k: &[i32]) -> Option<usize> {
        let g = self.size as i64;
        let mut i = 0usize;
        for &c in &k[..self.dim] {
            let c = i64::from(c);
            if 2 * c.abs() >= g {
                return None;
            }
            i = i * self.size + c.rem_euclid(g) as usize;
        }
        Some(i)
    }

    /// Samples → normalized Fourier coefficients, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
        let scale = 1.0 / self.len() as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
    }

    /// Normalized Fourier coefficients → samples, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    /// Samples `f` at every grid point.
    pub fn sample<F: FnMut(&[f64]) -> Complex64>(&self, mut f: F) -> Vec<Complex64> {
        (0..self.len()).map(|i| f(&self.point(i)[..self.dim])).collect()
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.len(), "grid data has the wrong length");
        let g = self.size;
        let mut line = vec![Complex64::default(); g];
        let table = twiddles(g, inverse);
        for axis in 0..self.dim {
            let stride = g.pow((self.dim - 1 - axis) as u32);
            let block = stride * g;
            for base in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + offset + j * stride];
                    }
                    fft_with(&mut line, &table);
                    for (j, v) in line.iter().enumerate() {
                        data[base + offset + j * stride] = *v;
                    }
                }
            }
        }
    }
}
