//! Lie-series conjugation `Ψ^F_t(a) = Σ_j (c^j / j!) w_j Ad_F^j(a)`.

use num_complex::Complex64;

use super::{moyal_commutator, ModeSymbol, SemiclassicalScale, Truncation};
use crate::{Error, Result};

/// Number of consecutive non-decreasing terms that flags divergence.
const DIVERGENCE_RUN: usize = 3;
const MAX_ORDER: usize = 400;

/// Coefficients and stopping rule of a Lie series in `Ad_F = [F, ·]_ħ`.
#[derive(Clone, Copy, Debug)]
pub struct LieSeries {
    /// Multiplier `c` in `c^j / j!`.
    pub coeff: Complex64,
    pub hbar: f64,
    /// Stop at the first order `j ≥ 1` whose term has mass below `tol·‖a‖_{0,0}`.
    pub tol: f64,
    pub trunc: Truncation,
    /// Extra per-order weight: `None` is plain `1`, `Some(s)` is `1/(j+s)`
    /// (`Some(2)` gives the `∫₀¹ t^{j+1} dt` weights of the averaged remainder).
    pub weight_shift: Option<u32>,
}

impl LieSeries {
    fn weight(&self, j: usize) -> f64 {
        match self.weight_shift {
            None => 1.0,
            Some(shift) => 1.0 / (j as f64 + f64::from(shift)),
        }
    }
}

/// Sums the Lie series of `a` generated by `f`.
///
/// The geometric remainder estimate after the last kept term is added to the
/// result's tail ledger.
pub fn lie_series(a: &ModeSymbol, f: &ModeSymbol, series: &LieSeries) -> Result<ModeSymbol> {
    a.lattice.check(&f.lattice)?;
    let base = a.mass();
    let mut sum = a.scale_real(series.weight(0));
    if base == 0.0 || f.is_empty() || series.coeff == Complex64::default() {
        return Ok(sum);
    }

    let mut ad = a.clone();
    let mut factor = Complex64::new(1.0, 0.0);
    let mut prev = base * series.weight(0);
    let mut rising = 0usize;
    for j in 1..=MAX_ORDER {
        ad = moyal_commutator(f, &ad, series.hbar, series.trunc)?;
        factor *= series.coeff / j as f64;
        let term = ad.scale(factor * series.weight(j));
        let size = term.mass();
        sum = sum.add(&term)?;

        // below the normal range the masses are round-off, not a trend
        if size < series.tol * base || size < f64::MIN_POSITIVE / f64::EPSILON {
            let ratio = if prev > 0.0 { size / prev } else { 0.0 };
            if ratio < 1.0 {
                sum.add_tail(size * ratio / (1.0 - ratio));
            }
            return Ok(sum);
        }
        if size >= prev && size > base * series.weight(0).max(1.0) * f64::EPSILON {
            rising += 1;
            if rising >= DIVERGENCE_RUN {
                return Err(Error::SeriesDivergence { order: j });
            }
        } else {
            rising = 0;
        }
        prev = size;
    }
    Err(Error::SeriesDivergence { order: MAX_ORDER })
}

/// Symbol of `e^{(itε/ħ)Op(F)} Op(a) e^{−(itε/ħ)Op(F)}`.
pub fn conjugate(
    a: &ModeSymbol,
    f: &ModeSymbol,
    t: f64,
    scale: SemiclassicalScale,
    tol: f64,
    trunc: Truncation,
) -> Result<ModeSymbol> {
    let series = LieSeries {
        coeff: Complex64::new(0.0, t * scale.ratio()),
        hbar: scale.hbar(),
        tol,
        trunc,
        weight_shift: None,
    };
    lie_series(a, f, &series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{Lattice, Wave};

    fn line() -> Lattice {
        Lattice::new(1, 1.0).unwrap()
    }

    #[test]
    fn zero_generator_or_zero_time_is_identity() {
        let l = line();
        let a = l.cos(Wave::new(&[1], &[1]), 0.3);
        let scale = SemiclassicalScale::equal(0.1).unwrap();
        let same = conjugate(&a, &l.zero(), 1.0, scale, 1e-14, Truncation::default()).unwrap();
        assert_eq!(same, a);
        let f = l.sin(Wave::angle(&[1]), 1.0);
        let same = conjugate(&a, &f, 0.0, scale, 1e-14, Truncation::default()).unwrap();
        assert_eq!(same, a);
    }

    #[test]
    fn conjugation_preserves_reality() {
        let l = line();
        let a = l.cos(Wave::new(&[1], &[1]), 0.3).add(&l.sin(Wave::action(&[2]), 0.5)).unwrap();
        let f = l.sin(Wave::new(&[1], &[1]), 0.2);
        let scale = SemiclassicalScale::equal(0.1).unwrap();
        let c = conjugate(&a, &f, 1.0, scale, 1e-15, Truncation::default()).unwrap();
        assert!(c.reality_defect() < 1e-14);
    }

    #[test]
    fn inverse_time_undoes_conjugation() {
        let l = line();
        let a = l.cos(Wave::new(&[1], &[1]), 0.3);
        let f = l.sin(Wave::new(&[1], &[-1]), 0.1);
        let scale = SemiclassicalScale::equal(0.2).unwrap();
        let fwd = conjugate(&a, &f, 1.0, scale, 1e-16, Truncation::EXACT).unwrap();
        let back = conjugate(&fwd, &f, -1.0, scale, 1e-16, Truncation::EXACT).unwrap();
        assert!(back.sub(&a).unwrap().mass() < 1e-13);
    }

    #[test]
    fn oversized_generator_is_reported_as_divergent() {
        let l = line();
        let a = l.cos(Wave::new(&[1], &[1]), 1.0);
        let f = l.sin(Wave::new(&[1], &[-1]), 400.0);
        let series = LieSeries {
            coeff: Complex64::new(0.0, 1.0),
            hbar: 1.0,
            tol: 1e-14,
            trunc: Truncation::default(),
            weight_shift: None,
        };
        assert!(matches!(lie_series(&a, &f, &series), Err(Error::SeriesDivergence { .. })));
    }
}
