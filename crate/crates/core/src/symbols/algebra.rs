//! Moyal product, Moyal commutator and Poisson bracket on mode symbols.
//!
//! For single waves `w_a, w_b` the Weyl composition law is
//!
//! ```text
//! e^{i w_a·z} ♯_ħ e^{i w_b·z} = e^{(iħ/2)(η_a·k_b − η_b·k_a)} e^{i (w_a + w_b)·z}
//! ```
//!
//! with the orientation fixed by `Op(e^{ik·x})` = multiplication and
//! `Op(f(ξ)) = f(ħD)`; it is checked against matrix products in
//! `quantize`.

use alloc::collections::BTreeMap;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use super::{ModeSymbol, Truncation, Wave};
use crate::Result;

/// Bilinear mode convolution `Σ_{w_a, w_b} kernel(w_a, w_b) A B` at
/// `w_a + w_b`, followed by relative truncation.
///
/// `gain` bounds `|kernel|` over all pairs and is used to propagate the
/// operand tails.
fn convolve<K>(a: &ModeSymbol, b: &ModeSymbol, trunc: Truncation, gain: f64, kernel: K) -> Result<ModeSymbol>
where
    K: Fn(&Wave, &Wave) -> Complex64,
{
    a.lattice.check(&b.lattice)?;
    let mut acc: BTreeMap<Wave, Complex64> = BTreeMap::new();
    for (wa, &amp_a) in &a.modes {
        for (wb, &amp_b) in &b.modes {
            let c = kernel(wa, wb);
            if c == Complex64::default() {
                continue;
            }
            *acc.entry(*wa + *wb).or_default() += amp_a * amp_b * c;
        }
    }

    let (mass_a, mass_b) = (a.mass(), b.mass());
    let threshold = trunc.tol * mass_a * mass_b;
    let mut dropped = 0.0;
    acc.retain(|_, v| {
        let n = v.norm();
        if n == 0.0 {
            false
        } else if n < threshold {
            dropped += n;
            false
        } else {
            true
        }
    });
    let tail = dropped + gain * (a.tail * mass_b + b.tail * mass_a + a.tail * b.tail);
    Ok(ModeSymbol::from_parts(a.lattice, acc, tail))
}

/// Moyal product `a ♯_ħ b`, the symbol of `Op_ħ(a) Op_ħ(b)`.
pub fn moyal(a: &ModeSymbol, b: &ModeSymbol, hbar: f64, trunc: Truncation) -> Result<ModeSymbol> {
    let half = 0.5 * hbar * a.dxi();
    convolve(a, b, trunc, 1.0, |wa, wb| Complex64::from_polar(1.0, half * wa.twist(wb) as f64))
}

/// Pointwise product `a·b` (the `ħ = 0` Moyal product).
pub fn pointwise(a: &ModeSymbol, b: &ModeSymbol) -> Result<ModeSymbol> {
    convolve(a, b, Truncation::EXACT, 1.0, |_, _| Complex64::new(1.0, 0.0))
}

/// Moyal commutator `[a, b]_ħ = a ♯_ħ b − b ♯_ħ a`, evaluated through the
/// sine kernel `2i sin((ħ/2)(η_a·k_b − η_b·k_a))` so that commuting pairs
/// cancel exactly.
pub fn moyal_commutator(a: &ModeSymbol, b: &ModeSymbol, hbar: f64, trunc: Truncation) -> Result<ModeSymbol> {
    let half = 0.5 * hbar * a.dxi();
    convolve(a, b, trunc, 2.0, |wa, wb| {
        let t = wa.twist(wb);
        if t == 0 {
            Complex64::default()
        } else {
            Complex64::new(0.0, 2.0 * (half * t as f64).sin())
        }
    })
}

/// Poisson bracket `{a, b} = ∂_ξ a·∂_x b − ∂_x a·∂_ξ b`.
///
/// On waves this is `(k_a·η_b − η_a·k_b) A B`, the `ħ → 0` limit of
/// `(i/ħ)[a, b]_ħ`.
pub fn poisson(a: &ModeSymbol, b: &ModeSymbol, trunc: Truncation) -> Result<ModeSymbol> {
    let dxi = a.dxi();
    let max_k = |s: &ModeSymbol| s.modes.keys().map(Wave::k_l1).max().unwrap_or(0) as f64;
    let max_m = |s: &ModeSymbol| s.modes.keys().map(Wave::m_l1).max().unwrap_or(0) as f64;
    let gain = dxi * (max_k(a) * max_m(b) + max_m(a) * max_k(b));
    convolve(a, b, trunc, gain, |wa, wb| Complex64::new(-dxi * wa.twist(wb) as f64, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{Lattice, NormParams};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line() -> Lattice {
        Lattice::new(1, 1.0).unwrap()
    }

    fn random_real(l: Lattice, rng: &mut ChaCha8Rng, n: usize) -> ModeSymbol {
        let mut s = l.zero();
        for _ in 0..n {
            let k: i32 = rng.gen_range(-3..=3);
            let m: i32 = rng.gen_range(-3..=3);
            let w = Wave::new(&[k], &[m]);
            let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            s.add_mode(w, amp);
            s.add_mode(-w, amp.conj());
        }
        s
    }

    #[test]
    fn constant_factor_commutes_through() {
        let l = line();
        let a = l.cos(Wave::new(&[1], &[2]), 0.7);
        let c = l.constant(3.0);
        let ab = moyal(&a, &c, 0.3, Truncation::EXACT).unwrap();
        assert_eq!(ab, a.scale_real(3.0));
    }

    #[test]
    fn angle_wave_times_action_wave_picks_up_half_phase() {
        let l = line();
        let hbar = 0.2;
        let a = l.wave(Wave::angle(&[1]), Complex64::new(1.0, 0.0));
        let b = l.wave(Wave::action(&[1]), Complex64::new(1.0, 0.0));
        let ab = moyal(&a, &b, hbar, Truncation::EXACT).unwrap();
        assert_eq!(ab.len(), 1);
        let amp = ab.get(&Wave::new(&[1], &[1]));
        let expect = Complex64::from_polar(1.0, -hbar / 2.0);
        assert_abs_diff_eq!(amp.re, expect.re, epsilon = 1e-15);
        assert_abs_diff_eq!(amp.im, expect.im, epsilon = 1e-15);
    }

    #[test]
    fn commutator_is_antisymmetric_and_vanishes_on_multipliers() {
        let l = line();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_real(l, &mut rng, 5);
        let b = random_real(l, &mut rng, 5);
        let ab = moyal_commutator(&a, &b, 0.1, Truncation::EXACT).unwrap();
        let ba = moyal_commutator(&b, &a, 0.1, Truncation::EXACT).unwrap();
        assert!(ab.add(&ba).unwrap().mass() < 1e-14);
        assert!(moyal_commutator(&a, &a, 0.1, Truncation::EXACT).unwrap().is_empty());

        let f = l.cos(Wave::action(&[1]), 1.0);
        let g = l.sin(Wave::action(&[3]), 2.0);
        assert!(moyal_commutator(&f, &g, 0.1, Truncation::EXACT).unwrap().is_empty());
        assert!(poisson(&f, &g, Truncation::EXACT).unwrap().is_empty());
    }

    #[test]
    fn commutator_matches_product_difference() {
        let l = line();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_real(l, &mut rng, 6);
        let b = random_real(l, &mut rng, 6);
        let hbar = 0.37;
        let direct = moyal_commutator(&a, &b, hbar, Truncation::EXACT).unwrap();
        let ab = moyal(&a, &b, hbar, Truncation::EXACT).unwrap();
        let ba = moyal(&b, &a, hbar, Truncation::EXACT).unwrap();
        assert!(direct.sub(&ab.sub(&ba).unwrap()).unwrap().mass() < 1e-13);
    }

    #[test]
    fn scaled_commutator_of_real_symbols_is_real() {
        let l = line();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_real(l, &mut rng, 6);
        let b = random_real(l, &mut rng, 6);
        let c = moyal_commutator(&a, &b, 0.2, Truncation::EXACT).unwrap().scale(Complex64::new(0.0, 5.0));
        assert!(c.reality_defect() < 1e-14);
    }

    #[test]
    fn commutator_norm_bound() {
        let l = line();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = NormParams::new(0.4, 0.7).unwrap();
        for _ in 0..20 {
            let a = random_real(l, &mut rng, 4);
            let f = random_real(l, &mut rng, 4);
            let c = moyal_commutator(&f, &a, 0.3, Truncation::EXACT).unwrap();
            assert!(c.norm(p) <= 2.0 * f.norm(p) * a.norm(p) * (1.0 + 1e-14));
        }
    }

    #[test]
    fn poisson_of_angle_and_action_waves() {
        // {cos ξ, sin x} = ∂_ξ cos ξ · ∂_x sin x = −sin ξ cos x
        let l = line();
        let a = l.cos(Wave::action(&[1]), 1.0);
        let b = l.sin(Wave::angle(&[1]), 1.0);
        let c = poisson(&a, &b, Truncation::EXACT).unwrap();
        for &(x, xi) in &[(0.2, 0.9), (-1.3, 2.2)] {
            let v = c.eval(&[x], &[xi]);
            assert_abs_diff_eq!(v.re, -xi.sin() * x.cos(), epsilon = 1e-14);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn semiclassical_limit_is_second_order() {
        let l = line();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_real(l, &mut rng, 5);
        let b = random_real(l, &mut rng, 5);
        let pb = poisson(&a, &b, Truncation::EXACT).unwrap();
        let err = |hbar: f64| {
            let c = moyal_commutator(&a, &b, hbar, Truncation::EXACT)
                .unwrap()
                .scale(Complex64::new(0.0, 1.0 / hbar));
            c.sub(&pb).unwrap().mass()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let rate = (e1 / e2).log2();
        assert!(rate > 1.9 && rate < 2.1, "rate {rate}");
    }

    #[test]
    fn truncation_moves_mass_into_tail() {
        let l = line();
        let big = l.cos(Wave::angle(&[1]), 1.0);
        let tiny = l.cos(Wave::angle(&[2]), 1e-20).add(&l.constant(1.0)).unwrap();
        let p = moyal(&big, &tiny, 0.1, Truncation { tol: 1e-14 }).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.tail() > 0.0 && p.tail() <= 2e-20);
    }
}
