//! Counterterm renormalization of `L̂_ω + ε_ħ Op_ħ(V)`.
//!
//! Step `n` conjugates by `U_n = e^{(iε_ħ/ħ)Op(F_n)}`, where `F_n` solves the
//! cohomological equation for `V_n − E_{n,n}` and the integrable
//! counterterm `R_n` is chosen so that `V_n − E_{n,n}` has zero average.
//! After `n` steps
//!
//! ```text
//! U_n···U_1 (L̂_ω + ε_ħ Op(V − R_1 − … − R_n)) (U_n···U_1)* = L̂_ω + ε_ħ Op(V_{n+1})
//! ```
//!
//! exactly, and `‖V_{n+1}‖` contracts at least by `α` per step under the
//! smallness condition.

mod driver;
mod unitary;

pub use driver::{
    bisect_threshold, compose_conjugations, counterterm, run, Counterterm, KamOptions, KamRun, KamState,
    StepRecord,
};
pub use unitary::{assemble_unitary, conjugation_residual};

use alloc::format;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::diophantine::DiophantineCert;
use crate::symbols::{ModeSymbol, NormParams, SemiclassicalScale};
use crate::{Error, Result};

/// The universal constants `α`, `β`, `λ = e^{β/(1−√α)} − 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KamConstants {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl Default for KamConstants {
    fn default() -> Self {
        let (alpha, beta) = (0.25, 1.0 / 16.0);
        KamConstants { alpha, beta, lambda: (beta / (1.0 - alpha.sqrt())).exp() - 1.0 }
    }
}

impl KamConstants {
    /// `λ < 1` and `β(1+β)(1 + (1+λ)/(1−λ)) ≤ α`.
    pub fn validate(&self) -> Result<()> {
        let l = self.lambda;
        let lhs = self.beta * (1.0 + self.beta) * (1.0 + (1.0 + l) / (1.0 - l));
        if !(l < 1.0 && lhs <= self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "constants α={}, β={}, λ={} violate λ < 1 or β(1+β)(1+(1+λ)/(1−λ)) = {lhs} ≤ α",
                self.alpha, self.beta, l
            )));
        }
        Ok(())
    }
}

/// Analyticity-loss schedule `σ_{n+1} = σ_n α^{1/(2(γ−1))}`,
/// `ρ_{n+1} = ρ_n − σ_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KamSchedule {
    pub s: f64,
    pub rho: f64,
    pub gamma: f64,
    pub sigma1: f64,
    pub factor: f64,
}

impl KamSchedule {
    pub fn new(p: NormParams, gamma: f64, constants: &KamConstants) -> Result<Self> {
        if !(gamma > 1.0) || !(p.rho > 0.0) {
            return Err(Error::InvalidParameter(format!("schedule needs γ > 1 and ρ > 0 (γ={gamma}, ρ={})", p.rho)));
        }
        let factor = constants.alpha.powf(1.0 / (2.0 * (gamma - 1.0)));
        let sigma1 = p.rho / (2.0 * core::f64::consts::E * (gamma - 1.0)) * factor;
        Ok(KamSchedule { s: p.s, rho: p.rho, gamma, sigma1, factor })
    }

    pub fn sigma(&self, n: usize) -> f64 {
        self.sigma1 * self.factor.powi(n as i32 - 1)
    }

    /// `ρ_n = ρ − σ_1 − … − σ_{n−1}`.
    pub fn rho(&self, n: usize) -> f64 {
        self.rho - self.sigma1 * (1.0 - self.factor.powi(n as i32 - 1)) / (1.0 - self.factor)
    }

    /// `u_n = min(s, ρ_n)`.
    pub fn u(&self, n: usize) -> f64 {
        self.s.min(self.rho(n))
    }

    /// Norm parameters `(s, ρ_n)`.
    pub fn params(&self, n: usize) -> NormParams {
        NormParams { s: self.s, rho: self.rho(n) }
    }

    /// `Σ σ_n ≤ ρ/2`, hence `ρ_n > ρ/2` for every `n`.
    pub fn total_loss(&self) -> f64 {
        self.sigma1 / (1.0 - self.factor)
    }
}

/// `ς/64 · (√ρ / (2(γ−1)))^{2(γ−1)}`.
pub fn smallness_threshold(p: NormParams, cert: &DiophantineCert) -> f64 {
    let g = cert.gamma - 1.0;
    cert.varsigma / 64.0 * (p.rho.sqrt() / (2.0 * g)).powf(2.0 * g)
}

/// Size of the perturbation as seen by the iteration, `(ε_ħ/ħ)‖V‖_{s,ρ}`,
/// compared with [`smallness_threshold`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Smallness {
    pub norm: f64,
    pub effective: f64,
    pub threshold: f64,
    pub holds: bool,
}

pub fn smallness(v: &ModeSymbol, p: NormParams, cert: &DiophantineCert, scale: SemiclassicalScale) -> Smallness {
    let norm = v.norm(p);
    let effective = scale.ratio() * norm;
    let threshold = smallness_threshold(p, cert);
    Smallness { norm, effective, threshold, holds: effective <= threshold }
}

pub fn smallness_check(v: &ModeSymbol, p: NormParams, cert: &DiophantineCert, scale: SemiclassicalScale) -> bool {
    smallness(v, p, cert, scale).holds
}
