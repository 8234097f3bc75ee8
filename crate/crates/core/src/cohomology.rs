//! The cohomological equation `{L_ω, F} = V − ⟨V⟩`.
//!
//! On modes `{L_ω, F}` multiplies `F̂(k, η)` by `i ω·k`, so the zero-average
//! solution is a single division per mode. Because `L_ω` is linear in `ξ`
//! the same `F` solves the quantum equation `(i/ħ)[L_ω, F]_ħ = V − ⟨V⟩`.

use alloc::format;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::diophantine::DiophantineCert;
use crate::symbols::{ModeSymbol, NormParams, Transport};
use crate::{Error, Result};

/// Relative floor below which `|ω·k|` is treated as a resonance.
pub const NEAR_RESONANCE: f64 = 1e-13;

/// `ω·k` for a `k` the certificate vouches for.
pub fn divisor(cert: &DiophantineCert, k: &[i32]) -> Result<f64> {
    if !cert.covers(k) {
        return Err(Error::CertificateTooSmall { k: k.to_vec(), k_max: cert.k_max });
    }
    let dot = cert.divisor(k);
    let omega = cert.omega.iter().map(|w| w * w).sum::<f64>().sqrt();
    let k1: f64 = k.iter().map(|&c| f64::from(c).abs()).sum();
    if dot.abs() < NEAR_RESONANCE * omega * k1 {
        return Err(Error::NearResonant { k: k.to_vec(), divisor: dot });
    }
    Ok(dot)
}

/// Zero-average solution of `{L_ω, F} = V − ⟨V⟩`.
///
/// The tail ledger of `V` is carried over scaled by the largest inverse
/// divisor met, which bounds the effect of the discarded modes as long as
/// they lived on the same angle frequencies.
pub fn solve(v: &ModeSymbol, cert: &DiophantineCert) -> Result<ModeSymbol> {
    check_dim(v, cert)?;
    let d = v.dim();
    let mut f = v.lattice().zero();
    let mut gain = 0.0f64;
    for (w, a) in v.iter().filter(|(w, _)| !w.is_angle_free()) {
        let dot = divisor(cert, &w.k[..d])?;
        gain = gain.max(1.0 / dot.abs());
        f.add_mode(*w, a / Complex64::new(0.0, dot));
    }
    f.add_tail(gain * v.tail());
    Ok(f)
}

/// `‖{L_ω, F} − (V − ⟨V⟩)‖_{0,0}`.
pub fn residual(v: &ModeSymbol, f: &ModeSymbol, cert: &DiophantineCert) -> Result<f64> {
    check_dim(v, cert)?;
    let lw = Transport::new(&cert.omega)?;
    Ok(lw.poisson(f)?.sub(&v.oscillating())?.mass())
}

/// Both sides of `‖F‖_{s,ρ−σ} ≤ ς^{-1} ((γ−1)/(eσ))^{γ−1} ‖V‖_{s,ρ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundReport {
    pub fn ensure(self) -> Result<Self> {
        if self.holds {
            Ok(self)
        } else {
            Err(Error::BoundViolated { lhs: self.lhs, rhs: self.rhs })
        }
    }
}

/// The small-divisor estimate with loss of analyticity `σ`.
pub fn bound_check(
    v: &ModeSymbol,
    f: &ModeSymbol,
    cert: &DiophantineCert,
    s: f64,
    rho: f64,
    sigma: f64,
) -> Result<BoundReport> {
    if !(sigma > 0.0 && sigma < rho) {
        return Err(Error::InvalidParameter(format!("need 0 < σ < ρ, got σ={sigma}, ρ={rho}")));
    }
    let g = cert.gamma - 1.0;
    let constant = (g / (core::f64::consts::E * sigma)).powf(g) / cert.varsigma;
    let lhs = f.norm(NormParams::new(s, rho - sigma)?);
    let rhs = constant * v.norm(NormParams::new(s, rho)?);
    // Rounding in the mode sums can tip an equality case.
    let holds = lhs <= rhs * (1.0 + 1e-12);
    Ok(BoundReport { lhs, rhs, holds })
}

fn check_dim(v: &ModeSymbol, cert: &DiophantineCert) -> Result<()> {
    if v.dim() != cert.dim() {
        return Err(Error::InvalidParameter(format!(
            "symbol of dimension {} with a certificate of dimension {}",
            v.dim(),
            cert.dim()
        )));
    }
    Ok(())
}
