//! Wigner distributions `W^ħ_ψ(a) = ⟨ψ, Op_ħ(a) ψ⟩`, position densities and
//! semiclassical-measure diagnostics over eigenvector sequences.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::fourier::Grid;
use crate::kam_classical::{symplectic_lift, TorusDiffeo};
use crate::quantize::TorusBasis;
use crate::symbols::ModeSymbol;
use crate::{Error, Result, MAX_DIM};

const UNIT_TOL: f64 = 1e-12;

/// A unit vector in `span{e_k : |k|_∞ ≤ N}`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    basis: TorusBasis,
    hbar: f64,
    coeffs: Vec<Complex64>,
}

impl StateVector {
    /// Wraps coefficients that must already have unit norm.
    pub fn new(basis: TorusBasis, hbar: f64, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::InvalidParameter(format!("{} coefficients for a basis of {}", coeffs.len(), basis.len())));
        }
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidParameter(format!("state has norm {norm}, expected 1")));
        }
        Ok(StateVector { basis, hbar, coeffs })
    }

    /// Normalizes `coeffs`.
    pub fn normalized(basis: TorusBasis, hbar: f64, mut coeffs: Vec<Complex64>) -> Result<Self> {
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("cannot normalize the zero vector".into()));
        }
        for c in coeffs.iter_mut() {
            *c /= norm;
        }
        Self::new(basis, hbar, coeffs)
    }

    /// `e_k`.
    pub fn basis_state(basis: TorusBasis, hbar: f64, k: &[i32]) -> Result<Self> {
        let i = basis.index(k).ok_or_else(|| Error::InvalidParameter(format!("k = {k:?} outside the basis")))?;
        let mut coeffs = vec![Complex64::default(); basis.len()];
        coeffs[i] = Complex64::new(1.0, 0.0);
        Self::new(basis, hbar, coeffs)
    }

    pub fn basis(&self) -> TorusBasis {
        self.basis
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
}

/// `⟨ψ, Op_ħ(a) ψ⟩`, summed mode by mode without forming the matrix.
pub fn wigner_eval(psi: &StateVector, a: &ModeSymbol) -> Result<Complex64> {
    let basis = psi.basis;
    if a.dim() != basis.dim() {
        return Err(Error::InvalidParameter(format!("symbol of dimension {} on a basis of dimension {}", a.dim(), basis.dim())));
    }
    let band = a.angle_band();
    if band > 2 * basis.n() {
        return Err(Error::BandOverflow { band, limit: 2 * basis.n() });
    }
    let d = basis.dim();
    let hbar = psi.hbar;
    let mut acc = Complex64::default();
    for (w, amp) in a.iter() {
        let eta = a.eta(w);
        for (col, c) in psi.coeffs.iter().enumerate() {
            if *c == Complex64::default() {
                continue;
            }
            let k = basis.k(col);
            let mut j = k;
            let mut phase = 0.0;
            for i in 0..d {
                j[i] += w.k[i];
                phase += eta[i] * f64::from(k[i] + j[i]);
            }
            if let Some(row) = basis.index(&j) {
                acc += psi.coeffs[row].conj() * amp * Complex64::from_polar(1.0, 0.5 * hbar * phase) * c;
            }
        }
    }
    Ok(acc)
}

/// `|ψ(x)|²` on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub dim: usize,
    /// Points per axis.
    pub size: usize,
    pub values: Vec<f64>,
}

impl Density {
    /// Riemann sum of the density (exact for trigonometric polynomials the
    /// grid resolves).
    pub fn integral(&self) -> f64 {
        let cell = (2.0 * PI / self.size as f64).powi(self.dim as i32);
        self.values.iter().sum::<f64>() * cell
    }

    /// `sup |ρ − (2π)^{-d}|`.
    pub fn flatness(&self) -> f64 {
        let flat = (2.0 * PI).powi(-(self.dim as i32));
        self.values.iter().map(|v| (v - flat).abs()).fold(0.0, f64::max)
    }
}

/// Samples `|ψ|²` with `ψ = (2π)^{-d/2} Σ c_k e^{ik·x}`; the grid has at least
/// `max(min_size, 4N + 2)` points per axis so the samples are exact.
pub fn density(psi: &StateVector, min_size: usize) -> Result<Density> {
    let basis = psi.basis;
    let d = basis.dim();
    let grid = Grid::new(d, min_size.max(4 * basis.n() + 2))?;
    let mut buf = vec![Complex64::default(); grid.len()];
    for (i, c) in psi.coeffs.iter().enumerate() {
        let slot = grid.slot(&basis.k(i)).expect("grid resolves the basis");
        buf[slot] = *c;
    }
    grid.inverse(&mut buf);
    let norm = (2.0 * PI).powi(-(d as i32));
    Ok(Density { dim: d, size: grid.size(), values: buf.iter().map(|z| z.norm_sqr() * norm).collect() })
}

/// Reference value of a test symbol on a state labelled `k`.
#[derive(Clone, Copy, Debug)]
pub enum Prediction<'a> {
    /// `(2π)^{-d} ∫ a(x, ħk) dx`, the Haar measure on the torus `{ξ = ħk}`.
    Haar,
    /// `(2π)^{-d} ∫ a(Θ(x, ħk)) dx` with `Θ` the symplectic lift of `θ`.
    Pushforward(&'a TorusDiffeo),
}

impl Prediction<'_> {
    pub fn evaluate(&self, a: &ModeSymbol, hbar: f64, k: &[i32], grid_size: usize) -> Result<f64> {
        let d = a.dim();
        let mut xi = [0.0; MAX_DIM];
        for i in 0..d {
            xi[i] = hbar * f64::from(k[i]);
        }
        match self {
            Prediction::Haar => Ok(a.torus_average_at(&xi[..d]).re),
            Prediction::Pushforward(theta) => {
                let grid = Grid::new(d, grid_size)?;
                let mut sum = 0.0;
                for g in 0..grid.len() {
                    let (y, eta) = symplectic_lift(theta, &grid.point(g)[..d], &xi[..d])?;
                    sum += a.eval(&y[..d], &eta[..d]).re;
                }
                Ok(sum / grid.len() as f64)
            }
        }
    }
}

/// One eigenvector of a sequence: `ħ`, its state, eigenvalue and label `k`.
#[derive(Clone, Debug)]
pub struct Eigenstate {
    pub hbar: f64,
    pub state: StateVector,
    pub eigenvalue: f64,
    pub label: Vec<i32>,
}

/// One row of the diagnostics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSample {
    pub hbar: f64,
    pub label: Vec<i32>,
    pub eigenvalue: f64,
    pub symbol: usize,
    pub value: f64,
    pub prediction: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub samples: Vec<MeasureSample>,
    /// Per symbol: log-log slope of the largest deviation at each `ħ` against
    /// `ħ` (`None` with fewer than two `ħ` values or a zero deviation).
    pub slopes: Vec<Option<f64>>,
    pub max_deviation: f64,
}

/// Tabulates `W^ħ_ψ(a)` against the prediction for every state and symbol.
pub fn measure_diagnostics(states: &[Eigenstate], symbols: &[ModeSymbol], prediction: Prediction<'_>) -> Result<MeasureReport> {
    let mut samples = Vec::new();
    for st in states {
        let size = 4 * st.state.basis.n() + 2;
        for (s, a) in symbols.iter().enumerate() {
            let value = wigner_eval(&st.state, a)?.re;
            let pred = prediction.evaluate(a, st.hbar, &st.label, size)?;
            samples.push(MeasureSample {
                hbar: st.hbar,
                label: st.label.clone(),
                eigenvalue: st.eigenvalue,
                symbol: s,
                value,
                prediction: pred,
                deviation: (value - pred).abs(),
            });
        }
    }
    let mut hbars: Vec<f64> = states.iter().map(|s| s.hbar).collect();
    hbars.sort_by(f64::total_cmp);
    hbars.dedup();
    let slopes = (0..symbols.len())
        .map(|s| {
            let worst: Vec<f64> = hbars
                .iter()
                .map(|&h| {
                    samples.iter().filter(|r| r.symbol == s && r.hbar == h).map(|r| r.deviation).fold(0.0, f64::max)
                })
                .collect();
            log_log_slope(&hbars, &worst)
        })
        .collect();
    let max_deviation = samples.iter().map(|r| r.deviation).fold(0.0, f64::max);
    Ok(MeasureReport { samples, slopes, max_deviation })
}

/// Least-squares slope of `ln y` against `ln x`; `None` unless there are two
/// distinct `x` and every value is positive.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return None;
    }
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}
