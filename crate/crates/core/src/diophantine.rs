//! Finite-range Diophantine certificates `|k·ω| ≥ ς |k|₁^{1−γ}`.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, MAX_DIM};

/// Outcome of an exhaustive scan of `0 < |k|₁ ≤ k_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophantineCert {
    pub omega: Vec<f64>,
    pub gamma: f64,
    pub varsigma: f64,
    pub k_max: u32,
    /// `min |k·ω| |k|₁^{γ−1}` over the scanned range.
    pub min_witness: f64,
    /// A `k` attaining `min_witness` (the first one in shell order).
    pub witness_k: Vec<i32>,
    pub certified: bool,
}

impl DiophantineCert {
    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    /// Whether `k` lies in the scanned range.
    pub fn covers(&self, k: &[i32]) -> bool {
        let n: i64 = k.iter().map(|&c| i64::from(c).abs()).sum();
        n <= i64::from(self.k_max)
    }

    /// `ω·k`.
    pub fn divisor(&self, k: &[i32]) -> f64 {
        self.omega.iter().zip(k).map(|(w, &c)| w * f64::from(c)).sum()
    }

    /// The certified lower bound `ς |k|₁^{1−γ}`.
    pub fn lower_bound(&self, k: &[i32]) -> f64 {
        let n: f64 = k.iter().map(|&c| f64::from(c).abs()).sum();
        self.varsigma * n.powf(1.0 - self.gamma)
    }
}

/// Scans `0 < |k|₁ ≤ k_max` and certifies `ω` with constant `ς`.
pub fn check(omega: &[f64], gamma: f64, varsigma: f64, k_max: u32) -> Result<DiophantineCert> {
    if !(varsigma > 0.0 && varsigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("ς = {varsigma} must be > 0")));
    }
    let (min_witness, witness_k) = scan(omega, gamma, k_max)?;
    Ok(DiophantineCert {
        omega: omega.to_vec(),
        gamma,
        varsigma,
        k_max,
        min_witness,
        witness_k,
        certified: min_witness >= varsigma,
    })
}

/// The largest `ς` certified on `0 < |k|₁ ≤ k_max`.
pub fn best_constant(omega: &[f64], gamma: f64, k_max: u32) -> Result<f64> {
    scan(omega, gamma, k_max).map(|(w, _)| w)
}

fn scan(omega: &[f64], gamma: f64, k_max: u32) -> Result<(f64, Vec<i32>)> {
    let d = omega.len();
    if d == 0 || d > MAX_DIM {
        return Err(Error::InvalidParameter(format!("frequency of dimension {d}")));
    }
    if omega.iter().any(|w| !w.is_finite()) || omega.iter().all(|&w| w == 0.0) {
        return Err(Error::InvalidParameter("ω must be finite and non-zero".into()));
    }
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("γ = {gamma} must be > 1")));
    }
    if k_max == 0 || k_max > i32::MAX as u32 {
        return Err(Error::InvalidParameter(format!("K_max = {k_max} must be ≥ 1")));
    }

    let mut best = f64::INFINITY;
    let mut best_k = [0i32; MAX_DIM];
    let mut resonance = None;
    let mut k = [0i32; MAX_DIM];
    for n in 1..=k_max as i32 {
        let weight = f64::from(n).powf(gamma - 1.0);
        shell(&mut k, 0, d, n, &mut |k| {
            if resonance.is_some() || !leads_positive(&k[..d]) {
                return;
            }
            let mut dot = 0.0;
            let mut scale = 0.0;
            for i in 0..d {
                let t = f64::from(k[i]) * omega[i];
                dot += t;
                scale += t.abs();
            }
            if dot.abs() <= 8.0 * f64::EPSILON * scale {
                resonance = Some(k[..d].to_vec());
                return;
            }
            let w = dot.abs() * weight;
            if w < best {
                best = w;
                best_k = *k;
            }
        });
        if let Some(k) = resonance {
            return Err(Error::Resonant { k });
        }
    }
    Ok((best, best_k[..d].to_vec()))
}

/// Half-space representative of `±k`: first non-zero entry positive.
fn leads_positive(k: &[i32]) -> bool {
    k.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

/// Calls `f` on every `k` with `Σ_{i ≥ axis} |k_i| = n` (earlier entries fixed).
fn shell<F: FnMut(&[i32; MAX_DIM])>(k: &mut [i32; MAX_DIM], axis: usize, d: usize, n: i32, f: &mut F) {
    if axis + 1 == d {
        k[axis] = n;
        f(k);
        if n != 0 {
            k[axis] = -n;
            f(k);
        }
        return;
    }
    for c in -n..=n {
        k[axis] = c;
        shell(k, axis + 1, d, n - c.abs(), f);
    }
}
