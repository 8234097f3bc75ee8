//! Analytic symbols on `T*T^d` as finite sums of phase-space plane waves.
//!
//! A symbol is `a(x, ξ) = Σ A(k, η) e^{i(k·x + η·ξ)}` with `k ∈ Z^d` and
//! `η = δξ·m`, `m ∈ Z^d`. Every symbol carries its lattice spacing `δξ`;
//! sums of lattice points stay on the lattice, which is what makes the Moyal
//! product of two mode symbols another finite mode symbol.
//!
//! Amplitudes are the plain coefficients of `e^{i(k·x+η·ξ)}`: no `(2π)^{d/2}`
//! factors anywhere, so [`ModeSymbol::norm`] is a weighted ℓ¹ sum of the
//! stored amplitudes.

mod algebra;
mod lie;
mod linear;
mod serial;

pub use algebra::{moyal, moyal_commutator, pointwise, poisson};
pub use lie::{conjugate, lie_series, LieSeries};
pub use linear::Transport;
pub use serial::{ModeEntry, SymbolDocument};

use alloc::collections::btree_map::{self, BTreeMap};
use alloc::format;
use core::ops::{Add, Neg};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{l1, linf, Error, Index, Result, MAX_DIM};

/// Phase-space frequency `w = (k, η)` with `η = δξ·m`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Wave {
    /// Angle frequency.
    pub k: Index,
    /// Action frequency in lattice units.
    pub m: Index,
}

impl Wave {
    pub const ZERO: Wave = Wave { k: [0; MAX_DIM], m: [0; MAX_DIM] };

    pub fn new(k: &[i32], m: &[i32]) -> Self {
        Wave { k: crate::index_from_slice(k), m: crate::index_from_slice(m) }
    }

    pub fn angle(k: &[i32]) -> Self {
        Wave::new(k, &[])
    }

    pub fn action(m: &[i32]) -> Self {
        Wave::new(&[], m)
    }

    /// `true` when the wave does not oscillate in `x`.
    pub fn is_angle_free(&self) -> bool {
        self.k.iter().all(|&c| c == 0)
    }

    pub fn k_l1(&self) -> i64 {
        l1(&self.k)
    }

    pub fn m_l1(&self) -> i64 {
        l1(&self.m)
    }

    pub fn k_linf(&self) -> i64 {
        linf(&self.k)
    }

    /// `m_a·k_b − m_b·k_a`; multiplied by `δξ` this is the symplectic pairing
    /// that drives the Moyal phase.
    pub(crate) fn twist(&self, other: &Wave) -> i64 {
        let mut acc = 0i64;
        for i in 0..MAX_DIM {
            acc += i64::from(self.m[i]) * i64::from(other.k[i])
                - i64::from(other.m[i]) * i64::from(self.k[i]);
        }
        acc
    }
}

impl Add for Wave {
    type Output = Wave;

    fn add(self, rhs: Wave) -> Wave {
        let mut out = self;
        for i in 0..MAX_DIM {
            out.k[i] += rhs.k[i];
            out.m[i] += rhs.m[i];
        }
        out
    }
}

impl Neg for Wave {
    type Output = Wave;

    fn neg(self) -> Wave {
        let mut out = self;
        for i in 0..MAX_DIM {
            out.k[i] = -out.k[i];
            out.m[i] = -out.m[i];
        }
        out
    }
}

/// Dimension and action-lattice spacing shared by a family of symbols.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    dxi: f64,
}

impl Lattice {
    pub fn new(dim: usize, dxi: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidParameter(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        if !(dxi.is_finite() && dxi > 0.0) {
            return Err(Error::InvalidParameter(format!("lattice spacing {dxi} must be positive")));
        }
        Ok(Lattice { dim, dxi })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dxi(&self) -> f64 {
        self.dxi
    }

    pub fn zero(&self) -> ModeSymbol {
        ModeSymbol { lattice: *self, modes: BTreeMap::new(), tail: 0.0 }
    }

    pub fn constant(&self, c: f64) -> ModeSymbol {
        self.wave(Wave::ZERO, Complex64::new(c, 0.0))
    }

    /// Single plane wave `amp·e^{i(k·x+η·ξ)}`.
    pub fn wave(&self, w: Wave, amp: Complex64) -> ModeSymbol {
        let mut s = self.zero();
        s.add_mode(w, amp);
        s
    }

    /// `amp·cos(k·x + η·ξ)`.
    pub fn cos(&self, w: Wave, amp: f64) -> ModeSymbol {
        let mut s = self.zero();
        s.add_mode(w, Complex64::new(0.5 * amp, 0.0));
        s.add_mode(-w, Complex64::new(0.5 * amp, 0.0));
        s
    }

    /// `amp·sin(k·x + η·ξ)`.
    pub fn sin(&self, w: Wave, amp: f64) -> ModeSymbol {
        let mut s = self.zero();
        s.add_mode(w, Complex64::new(0.0, -0.5 * amp));
        s.add_mode(-w, Complex64::new(0.0, 0.5 * amp));
        s
    }

    pub(crate) fn check(&self, other: &Lattice) -> Result<()> {
        if self.dim != other.dim || self.dxi != other.dxi {
            return Err(Error::LatticeMismatch {
                left_dim: self.dim,
                left_dxi: self.dxi,
                right_dim: other.dim,
                right_dxi: other.dxi,
            });
        }
        Ok(())
    }
}

/// Analyticity widths `(s, ρ)` of the weighted norm: `s` for the action
/// frequencies `η`, `ρ` for the angle frequencies `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub s: f64,
    pub rho: f64,
}

impl NormParams {
    pub fn new(s: f64, rho: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0 && rho.is_finite() && rho >= 0.0) {
            return Err(Error::InvalidParameter(format!("norm widths (s={s}, ρ={rho}) must be ≥ 0")));
        }
        Ok(NormParams { s, rho })
    }

    /// Compact norm widths `s = ρ = u`.
    pub fn compact(u: f64) -> Result<Self> {
        Self::new(u, u)
    }

    /// Unweighted ℓ¹ mass, `‖·‖_{0,0}`.
    pub const MASS: NormParams = NormParams { s: 0.0, rho: 0.0 };
}

/// Whether the perturbation strength equals `ħ` or is much smaller.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Equal,
    Subcritical,
}

/// The pair `(ħ, ε_ħ)` with `0 < ε_ħ ≤ ħ ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalScale {
    hbar: f64,
    eps: f64,
}

impl SemiclassicalScale {
    pub fn new(hbar: f64, eps: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar <= 1.0) {
            return Err(Error::InvalidParameter(format!("ħ = {hbar} outside (0, 1]")));
        }
        if !(eps > 0.0 && eps <= hbar) {
            return Err(Error::InvalidParameter(format!("ε_ħ = {eps} must satisfy 0 < ε_ħ ≤ ħ = {hbar}")));
        }
        Ok(SemiclassicalScale { hbar, eps })
    }

    /// `ε_ħ = ħ`.
    pub fn equal(hbar: f64) -> Result<Self> {
        Self::new(hbar, hbar)
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `ε_ħ / ħ`, the factor in front of every generator exponent.
    pub fn ratio(&self) -> f64 {
        self.eps / self.hbar
    }

    pub fn regime(&self) -> Regime {
        if self.eps == self.hbar {
            Regime::Equal
        } else {
            Regime::Subcritical
        }
    }
}

/// Mode-dropping policy applied by products and series.
///
/// A mode produced by an operation on `a` and `b` is dropped when its
/// amplitude is below `tol · ‖a‖_{0,0} · ‖b‖_{0,0}`; the dropped ℓ¹ mass is
/// added to the result's tail ledger.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub tol: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { tol: 1e-14 }
    }
}

impl Truncation {
    pub const EXACT: Truncation = Truncation { tol: 0.0 };
}

/// A finite sum of phase-space plane waves.
///
/// Zero amplitudes are never stored. `tail` bounds the ℓ¹ mass of everything
/// that truncation has discarded on the way to this symbol, so
/// `|a(x,ξ) − Σ stored| ≤ tail` pointwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymbolDocument", into = "SymbolDocument")]
pub struct ModeSymbol {
    lattice: Lattice,
    modes: BTreeMap<Wave, Complex64>,
    tail: f64,
}

impl ModeSymbol {
    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn dxi(&self) -> f64 {
        self.lattice.dxi
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn get(&self, w: &Wave) -> Complex64 {
        self.modes.get(w).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> btree_map::Iter<'_, Wave, Complex64> {
        self.modes.iter()
    }

    /// Action frequency `η = δξ·m` of a wave on this symbol's lattice.
    pub fn eta(&self, w: &Wave) -> [f64; MAX_DIM] {
        let mut eta = [0.0; MAX_DIM];
        for (e, &m) in eta.iter_mut().zip(w.m.iter()) {
            *e = self.lattice.dxi * f64::from(m);
        }
        eta
    }

    /// Adds `amp` to the amplitude of `w`, removing the entry if it cancels.
    pub fn add_mode(&mut self, w: Wave, amp: Complex64) {
        if amp == Complex64::default() {
            return;
        }
        match self.modes.entry(w) {
            btree_map::Entry::Vacant(e) => {
                e.insert(amp);
            }
            btree_map::Entry::Occupied(mut e) => {
                let v = *e.get() + amp;
                if v == Complex64::default() {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    pub(crate) fn add_tail(&mut self, mass: f64) {
        self.tail += mass;
    }

    pub fn scale(&self, c: Complex64) -> ModeSymbol {
        let mut out = self.lattice.zero();
        if c != Complex64::default() {
            for (w, a) in &self.modes {
                out.add_mode(*w, a * c);
            }
        }
        out.tail = self.tail * c.norm();
        out
    }

    pub fn scale_real(&self, c: f64) -> ModeSymbol {
        self.scale(Complex64::new(c, 0.0))
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: Complex64, other: &ModeSymbol) -> Result<ModeSymbol> {
        self.lattice.check(&other.lattice)?;
        let mut out = self.clone();
        for (w, a) in &other.modes {
            out.add_mode(*w, a * c);
        }
        out.tail += c.norm() * other.tail;
        Ok(out)
    }

    pub fn add(&self, other: &ModeSymbol) -> Result<ModeSymbol> {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &ModeSymbol) -> Result<ModeSymbol> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// Weighted norm `Σ |A(k,η)| e^{|η|₁ s} e^{|k|₁ ρ}`.
    pub fn norm(&self, p: NormParams) -> f64 {
        let dxi = self.lattice.dxi;
        self.modes
            .iter()
            .map(|(w, a)| {
                let weight = (w.m_l1() as f64 * dxi * p.s + w.k_l1() as f64 * p.rho).exp();
                a.norm() * weight
            })
            .fold(0.0, |acc, x| acc + x)
    }

    /// Compact norm `‖a‖_u = ‖a‖_{u,u}` with `|w| = |k|₁ + |η|₁`.
    pub fn compact_norm(&self, u: f64) -> f64 {
        self.norm(NormParams { s: u, rho: u })
    }

    /// `‖a‖_{0,0}`, also an upper bound for `sup |a|`.
    pub fn mass(&self) -> f64 {
        self.norm(NormParams::MASS)
    }

    /// Average along the linear flow: the `k = 0` modes.
    pub fn average(&self) -> ModeSymbol {
        let mut out = self.lattice.zero();
        for (w, a) in self.modes.iter().filter(|(w, _)| w.is_angle_free()) {
            out.modes.insert(*w, *a);
        }
        out.tail = self.tail;
        out
    }

    /// `a − ⟨a⟩`.
    pub fn oscillating(&self) -> ModeSymbol {
        let mut out = self.lattice.zero();
        for (w, a) in self.modes.iter().filter(|(w, _)| !w.is_angle_free()) {
            out.modes.insert(*w, *a);
        }
        out.tail = self.tail;
        out
    }

    /// `true` when every stored wave has `k = 0`.
    pub fn is_action_only(&self) -> bool {
        self.modes.keys().all(Wave::is_angle_free)
    }

    /// `Σ |A(w) − conj A(−w)|`; zero exactly for real symbols.
    pub fn reality_defect(&self) -> f64 {
        let mut defect = 0.0;
        for (w, a) in &self.modes {
            defect += (a - self.get(&-*w).conj()).norm();
        }
        defect
    }

    /// Projects onto real symbols: `A(w) ← (A(w) + conj A(−w)) / 2`.
    pub fn real_part(&self) -> ModeSymbol {
        let mut out = self.lattice.zero();
        for (w, a) in &self.modes {
            out.add_mode(*w, 0.5 * a);
            out.add_mode(-*w, 0.5 * a.conj());
        }
        out.tail = self.tail;
        out
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        let d = self.dim();
        let mut acc = Complex64::default();
        for (w, a) in &self.modes {
            let eta = self.eta(w);
            let mut phase = 0.0;
            for i in 0..d {
                phase += f64::from(w.k[i]) * x[i] + eta[i] * xi[i];
            }
            acc += a * Complex64::from_polar(1.0, phase);
        }
        acc
    }

    /// `(2π)^{-d} ∫ a(x, ξ) dx`, the flat-torus average at fixed `ξ`.
    pub fn torus_average_at(&self, xi: &[f64]) -> Complex64 {
        let zero = [0.0; MAX_DIM];
        self.average().eval(&zero[..self.dim()], xi)
    }

    /// Drops modes with `|A| < threshold`, moving their mass into the tail.
    pub fn prune(&self, threshold: f64) -> ModeSymbol {
        let mut out = self.lattice.zero();
        out.tail = self.tail;
        for (w, a) in &self.modes {
            if a.norm() < threshold {
                out.tail += a.norm();
            } else {
                out.modes.insert(*w, *a);
            }
        }
        out
    }

    /// Largest `|k|_∞` among stored waves.
    pub fn angle_band(&self) -> usize {
        self.modes.keys().map(|w| w.k_linf()).max().unwrap_or(0) as usize
    }

    /// Largest `|k|₁` among stored waves.
    pub fn angle_order(&self) -> u32 {
        self.modes.keys().map(|w| w.k_l1()).max().unwrap_or(0) as u32
    }

    pub(crate) fn from_parts(lattice: Lattice, modes: BTreeMap<Wave, Complex64>, tail: f64) -> Self {
        ModeSymbol { lattice, modes, tail }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line() -> Lattice {
        Lattice::new(1, 1.0).unwrap()
    }

    #[test]
    fn norm_of_zero_is_zero() {
        assert!(line().zero().norm(NormParams::new(0.3, 0.1).unwrap()).to_bits() == 0.0f64.to_bits());
    }

    #[test]
    fn norm_of_cos_x() {
        let a = line().cos(Wave::angle(&[1]), 1.0);
        for s in [0.0, 0.5, 3.0] {
            let n = a.norm(NormParams::new(s, 0.1).unwrap());
            assert_abs_diff_eq!(n, 0.1f64.exp(), epsilon = 1e-15);
        }
    }

    #[test]
    fn norm_of_cos_x_cos_xi() {
        let l = line();
        let a = pointwise(&l.cos(Wave::angle(&[1]), 1.0), &l.cos(Wave::action(&[1]), 1.0)).unwrap();
        assert_eq!(a.len(), 4);
        assert_abs_diff_eq!(a.compact_norm(0.1), 0.2f64.exp(), epsilon = 1e-15);
    }

    #[test]
    fn average_keeps_angle_free_modes() {
        let l = line();
        let a = l.cos(Wave::angle(&[1]), 1.0).add(&l.constant(2.0)).unwrap();
        assert_eq!(a.average(), l.constant(2.0));

        let b = pointwise(&l.cos(Wave::angle(&[1]), 1.0), &l.cos(Wave::action(&[1]), 1.0)).unwrap();
        assert!(b.average().is_empty());

        let cxi = l.cos(Wave::action(&[1]), 1.0);
        let c = cxi
            .add(&pointwise(&l.sin(Wave::angle(&[1]), 1.0), &cxi).unwrap())
            .unwrap();
        assert_eq!(c.average(), cxi);
        assert_eq!(c.average().average(), c.average());
    }

    #[test]
    fn cancelled_modes_are_not_stored() {
        let l = line();
        let a = l.cos(Wave::angle(&[2]), 1.5);
        let z = a.sub(&a).unwrap();
        assert!(z.is_empty());
    }

    #[test]
    fn eval_matches_closed_form() {
        let l = line();
        let a = pointwise(&l.cos(Wave::angle(&[1]), 1.0), &l.sin(Wave::action(&[1]), 2.0)).unwrap();
        let (x, xi) = (0.3, -1.1);
        let v = a.eval(&[x], &[xi]);
        assert_abs_diff_eq!(v.re, 2.0 * x.cos() * xi.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
        assert_eq!(a.reality_defect(), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Lattice::new(0, 1.0).is_err());
        assert!(Lattice::new(1, 0.0).is_err());
        assert!(SemiclassicalScale::new(0.1, 0.2).is_err());
        assert!(SemiclassicalScale::new(1.5, 0.2).is_err());
        assert_eq!(SemiclassicalScale::new(0.1, 0.01).unwrap().regime(), Regime::Subcritical);
        assert_eq!(SemiclassicalScale::equal(0.1).unwrap().regime(), Regime::Equal);
    }

    #[test]
    fn lattice_mismatch_is_an_error() {
        let a = Lattice::new(1, 1.0).unwrap().constant(1.0);
        let b = Lattice::new(1, 0.5).unwrap().constant(1.0);
        assert!(matches!(a.add(&b), Err(Error::LatticeMismatch { .. })));
    }
}
