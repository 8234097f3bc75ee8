use alloc::format;

use num_complex::Complex64;

use super::{TorusBasis, TorusOperator};
use crate::symbols::{ModeSymbol, Transport};
use crate::{Error, Result};

/// Truncated Weyl quantization `Op_ħ(a)` on `|k|_∞ ≤ N`.
///
/// A wave `(k₀, η₀, A)` maps `e_k` to `A e^{iħ η₀·(2k+k₀)/2} e_{k+k₀}`: the
/// action frequency is evaluated at the midpoint `ħ(j+k)/2` of the two
/// indices it couples, which makes real symbols Hermitian.
pub fn weyl_matrix(a: &ModeSymbol, hbar: f64, n: usize) -> Result<TorusOperator> {
    let basis = TorusBasis::new(a.dim(), n)?;
    let band = a.angle_band();
    if band > 2 * n {
        return Err(Error::BandOverflow { band, limit: 2 * n });
    }
    let d = a.dim();
    let mut op = TorusOperator::zeros(basis, hbar, band);
    for (w, amp) in a.iter() {
        let eta = a.eta(w);
        for col in 0..basis.len() {
            let k = basis.k(col);
            let mut j = k;
            let mut phase = 0.0;
            for i in 0..d {
                j[i] += w.k[i];
                phase += eta[i] * f64::from(k[i] + j[i]);
            }
            if let Some(row) = basis.index(&j) {
                *op.entry_mut(row, col) += amp * Complex64::from_polar(1.0, 0.5 * hbar * phase);
            }
        }
    }
    Ok(op)
}

/// `L̂_ω = diag(ħ ω·k)`.
pub fn transport_matrix(omega: &Transport, hbar: f64, n: usize) -> Result<TorusOperator> {
    let basis = TorusBasis::new(omega.dim(), n)?;
    if !(hbar > 0.0) {
        return Err(Error::InvalidParameter(format!("ħ = {hbar} must be > 0")));
    }
    Ok(TorusOperator::diagonal(basis, hbar, |k| {
        Complex64::new(hbar * omega.frequency(&k[..omega.dim()]), 0.0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{moyal, Lattice, Truncation, Wave};
    use approx::assert_abs_diff_eq;
    #[allow(unused_imports)]
    use num_traits::Float;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn xi_is_diagonal() {
        let t = Transport::new(&[1.0]).unwrap();
        let m = transport_matrix(&t, 0.1, 2).unwrap().to_dense();
        for (i, v) in [-0.2, -0.1, 0.0, 0.1, 0.2].iter().enumerate() {
            assert_abs_diff_eq!(m[(i, i)].re, *v, epsilon = 1e-15);
        }
        assert_eq!(m.iter().filter(|z| z.norm() > 0.0).count(), 4);
    }

    #[test]
    fn cosine_is_symmetric_shift() {
        let l = Lattice::new(1, 1.0).unwrap();
        let m = weyl_matrix(&l.cos(Wave::angle(&[1]), 1.0), 0.3, 3).unwrap().to_dense();
        for r in 0..7 {
            for c in 0..7 {
                let expect = if (r as i32 - c as i32).abs() == 1 { 0.5 } else { 0.0 };
                assert_eq!(m[(r, c)], Complex64::new(expect, 0.0));
            }
        }
    }

    #[test]
    fn mixed_wave_phase() {
        let l = Lattice::new(1, 1.0).unwrap();
        let hbar = 0.2;
        let op = weyl_matrix(&l.wave(Wave::new(&[1], &[1]), Complex64::new(1.0, 0.0)), hbar, 4).unwrap();
        let b = op.basis();
        for k in -4..4 {
            let z = op.get(b.index(&[k + 1]).unwrap(), b.index(&[k]).unwrap());
            let expect = Complex64::from_polar(1.0, hbar * f64::from(2 * k + 1) / 2.0);
            assert_abs_diff_eq!((z - expect).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn exp_ix_times_exp_ixi_against_matrices() {
        // e^{ix} ♯ e^{iξ} = e^{−iħ/2} e^{i(x+ξ)}: checked on operators.
        let l = Lattice::new(1, 1.0).unwrap();
        let hbar = 0.35;
        let a = l.wave(Wave::angle(&[1]), Complex64::new(1.0, 0.0));
        let b = l.wave(Wave::action(&[1]), Complex64::new(1.0, 0.0));
        let lhs = weyl_matrix(&a, hbar, 6).unwrap().mul(&weyl_matrix(&b, hbar, 6).unwrap()).unwrap();
        let c = l.wave(Wave::new(&[1], &[1]), Complex64::from_polar(1.0, -hbar / 2.0));
        let rhs = weyl_matrix(&c, hbar, 6).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-15);
        assert!(moyal(&a, &b, hbar, Truncation::EXACT).unwrap().sub(&c).unwrap().mass() < 1e-15);
    }

    #[test]
    fn band_overflow() {
        let l = Lattice::new(1, 1.0).unwrap();
        let a = l.cos(Wave::angle(&[5]), 1.0);
        assert_eq!(weyl_matrix(&a, 0.1, 2), Err(Error::BandOverflow { band: 5, limit: 4 }));
    }

    #[test]
    fn real_symbols_give_hermitian_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = Lattice::new(2, 0.5).unwrap();
        let mut a = l.zero();
        for _ in 0..10 {
            let w = Wave::new(&[rng.gen_range(-2..=2), rng.gen_range(-2..=2)], &[rng.gen_range(-3..=3), rng.gen_range(-3..=3)]);
            let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            a.add_mode(w, amp);
            a.add_mode(-w, amp.conj());
        }
        let op = weyl_matrix(&a, 0.17, 5).unwrap();
        assert!(op.hermitian_defect() < 1e-15);
    }
}
