//! Semiclassical KAM renormalization on the flat torus.
//!
//! Symbols on `T*T^d` are finite sums of phase-space plane waves
//! `A e^{i(k·x + η·ξ)}` with `η` on a lattice `δξ·Z^d`. On that class the
//! Moyal product, the Lie-series conjugation and the cohomological equation
//! are all exact mode arithmetic, and the Weyl quantization is an explicit
//! matrix on the Fourier basis `{e^{ik·x}}`.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, configuration
//! and the experiment runner live in the `torkam` crate.
//!
//! Module map:
//!
//! - [`symbols`]: mode symbols, analytic norms, averaging, Moyal calculus,
//!   Lie-series conjugation.
//! - [`diophantine`]: finite-range Diophantine certificates.
//! - [`cohomology`]: the small-divisor equation `{L_ω, F} = V − ⟨V⟩`.
//! - [`quantize`]: truncated Weyl matrices, spectra and operator norms.
//! - [`kam_quantum`]: the counterterm renormalization driver.
//! - [`kam_classical`]: Newton iteration for vector fields on `T^d` and the
//!   transport unitary built from the conjugacy.
//! - [`wigner`]: Wigner distributions, densities and measure diagnostics.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cohomology;
pub mod diophantine;
mod error;
pub mod fourier;
pub mod kam_classical;
pub mod kam_quantum;
pub mod quantize;
pub mod symbols;
pub mod wigner;

pub use error::{Error, Result};

pub use num_complex::Complex64;

// `f64` has no `exp`/`sin`/... without std: modules import `num_traits::Float`
// (backed by libm). Whenever std is also in the crate graph its inherent
// methods win and the import goes unused, hence the `allow`s.

/// Largest torus dimension supported by the fixed-size mode keys.
pub const MAX_DIM: usize = 3;

/// Multi-index on `Z^d`, padded with zeros beyond the active dimension.
pub type Index = [i32; MAX_DIM];

pub(crate) fn l1(k: &Index) -> i64 {
    k.iter().map(|&c| i64::from(c).abs()).sum()
}

pub(crate) fn linf(k: &Index) -> i64 {
    k.iter().map(|&c| i64::from(c).abs()).max().unwrap_or(0)
}

pub(crate) fn index_from_slice(k: &[i32]) -> Index {
    let mut out = [0; MAX_DIM];
    out[..k.len()].copy_from_slice(k);
    out
}
