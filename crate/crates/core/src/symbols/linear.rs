use alloc::format;

use num_complex::Complex64;

use super::ModeSymbol;
use crate::{Error, Result, MAX_DIM};

/// The linear symbol `L_ω(ξ) = ω·ξ`.
///
/// It is not a finite mode sum, but its brackets with mode symbols are: since
/// `L_ω` is a polynomial of degree one, `(i/ħ)[L_ω, b]_ħ = {L_ω, b}` exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transport {
    dim: usize,
    omega: [f64; MAX_DIM],
}

impl Transport {
    pub fn new(omega: &[f64]) -> Result<Self> {
        if omega.is_empty() || omega.len() > MAX_DIM {
            return Err(Error::InvalidParameter(format!("frequency of length {}", omega.len())));
        }
        let mut w = [0.0; MAX_DIM];
        w[..omega.len()].copy_from_slice(omega);
        Ok(Transport { dim: omega.len(), omega: w })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega[..self.dim]
    }

    /// `ω·k`.
    pub fn frequency(&self, k: &[i32]) -> f64 {
        self.omega().iter().zip(k).map(|(w, &c)| w * f64::from(c)).sum()
    }

    /// `[L_ω, b]_ħ = ħ Σ (ω·k) B e^{i(k·x+η·ξ)}`.
    pub fn commutator(&self, b: &ModeSymbol, hbar: f64) -> Result<ModeSymbol> {
        self.map_modes(b, |wk| Complex64::new(hbar * wk, 0.0))
    }

    /// `{L_ω, b} = ω·∂_x b = Σ i(ω·k) B e^{i(k·x+η·ξ)}`.
    pub fn poisson(&self, b: &ModeSymbol) -> Result<ModeSymbol> {
        self.map_modes(b, |wk| Complex64::new(0.0, wk))
    }

    fn map_modes(&self, b: &ModeSymbol, f: impl Fn(f64) -> Complex64) -> Result<ModeSymbol> {
        if b.dim() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "transport of dimension {} applied to a symbol of dimension {}",
                self.dim,
                b.dim()
            )));
        }
        let mut out = b.lattice().zero();
        let mut kmax = 0.0f64;
        for (w, amp) in b.iter() {
            let wk = self.frequency(&w.k[..self.dim]);
            kmax = kmax.max(f(wk).norm());
            out.add_mode(*w, amp * f(wk));
        }
        out.add_tail(kmax * b.tail());
        Ok(out)
    }
}
